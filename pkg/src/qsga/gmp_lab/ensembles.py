"""Density matrices of the matrix-problem ensembles and the game **G**.

The *direct* ensemble averages ``|psi_v1> ... |psi_vn>`` over the side's
label randomness. The *measured* ensemble starts from the product of start
states on ``n`` registers and measures a classical function of the hash
values:

* side 0 (labels ``M s``) measures ``M'^T (y_1, ..., y_j)``, where ``y_c`` sums
  ``H(x_i)`` over the rows ``i`` of class ``c`` and ``M'`` drops repeated rows;
* side 1 (pattern labels) measures the class sums ``(y_1, ..., y_j)`` themselves.

For uniform secrets and independent per-class values the two constructions
agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import sparse

from ..finite_math import GroupMatrix, distinct_rows, equality_pattern
from ..group_action import ActionContext, element_state
from ..quantum_core import (
    DENSE_CAP,
    PRUNE_TOL,
    DensityMatrix,
    Layout,
    PureState,
    bits,
    dephase,
    frobenius_distance,
    measure_label_function,
    mix,
    mix_records,
    tensor_all,
    trace_distance,
)
from .instance import (
    MAX_SECRET_SUPPORT,
    GmpInstance,
    class_indicator,
    pattern_support,
    sample_labels,
)

SPARSE_CAP = 2**14
MC_BATCHES = 10


@dataclass(frozen=True)
class TupleSpace:
    """Basis data for ``n`` registers of ``k`` bits under one action."""

    layout: Layout
    hv: np.ndarray
    alpha: np.ndarray

    @property
    def dim(self) -> int:
        return self.hv.shape[0]


def tuple_space(ctx: ActionContext, n: int) -> TupleSpace:
    dim = 2 ** (ctx.k * n)
    if dim > SPARSE_CAP:
        raise ValueError(f"tuple space 2^(k n) = {dim} exceeds {SPARSE_CAP}; shrink k or n")
    layout = Layout([bits(f"x{i + 1}", ctx.k) for i in range(n)])
    labels = layout.labels_array()
    hv = ctx.table[labels]
    alpha = reduce(np.kron, [ctx.start_state.amplitudes] * n)
    return TupleSpace(layout, hv, alpha)


def product_start(ctx: ActionContext, n: int) -> PureState:
    space = tuple_space(ctx, n)
    return PureState(space.layout, space.alpha)


def class_sums(space: TupleSpace, M: GroupMatrix) -> np.ndarray:
    """``(dim, j)`` array of per-class sums of hash values."""
    P = class_indicator(equality_pattern(M))
    return (space.hv @ P) % M.N


def real_side_keys(space: TupleSpace, M: GroupMatrix) -> np.ndarray:
    """``M'^T`` applied to the class sums, one row per basis tuple."""
    Mp = distinct_rows(M).entries
    return (class_sums(space, M) @ Mp) % M.N


def side_keys(space: TupleSpace, M: GroupMatrix, b: int) -> np.ndarray:
    return real_side_keys(space, M) if b == 0 else class_sums(space, M)


def _label_support(inst: GmpInstance) -> tuple[np.ndarray, np.ndarray]:
    """Equally weighted or explicit label vectors ``v`` with probabilities."""
    if inst.b == 0:
        secrets, p = inst.secrets.enumerate(inst.N)
        V = (secrets @ inst.M.entries.T) % inst.N
        return V, p
    C = pattern_support(inst.pattern, inst.N, inst.pattern_sampling)
    V = C @ class_indicator(inst.pattern).T
    return V, np.full(V.shape[0], 1.0 / V.shape[0])


def exact_support_size(inst: GmpInstance) -> int:
    if inst.b == 0:
        return inst.secrets.support_size(inst.N)
    j = inst.pattern.j
    if inst.pattern_sampling == "independent":
        return inst.N**j
    return math.perm(inst.N, j) if j <= inst.N else 0


def _kernel(uniq: np.ndarray, V: np.ndarray, p: np.ndarray, N: int, chunk: int = 4096) -> np.ndarray:
    """``Phi[t, t'] = sum_v p_v omega^(v . (u_t - u_t'))`` over unique hash tuples."""
    T = uniq.shape[0]
    roots = np.exp(2j * np.pi * np.arange(N) / N)
    phi = np.zeros((T, T), dtype=complex)
    for start in range(0, V.shape[0], chunk):
        Vc, pc = V[start:start + chunk], p[start:start + chunk]
        E = roots[(uniq @ Vc.T) % N]
        phi += (E * pc) @ E.conj().T
    return phi


def _expand(phi: np.ndarray, inv: np.ndarray, alpha: np.ndarray, layout: Layout) -> DensityMatrix:
    dim = alpha.shape[0]
    if dim <= DENSE_CAP:
        rho = np.outer(alpha, alpha.conj()) * phi[np.ix_(inv, inv)]
        return DensityMatrix(layout, rho)
    groups = [np.flatnonzero(inv == t) for t in range(phi.shape[0])]
    rows, cols, vals = [], [], []
    for t, t2 in zip(*np.nonzero(np.abs(phi) >= PRUNE_TOL)):
        a, b = groups[t], groups[t2]
        rr, cc = np.meshgrid(a, b, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append((phi[t, t2] * np.outer(alpha[a], alpha[b].conj())).ravel())
    mat = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(dim, dim))
    return DensityMatrix(layout, mat)


def direct_kernel(inst: GmpInstance, V: np.ndarray | None = None, p: np.ndarray | None = None):
    """Kernel over unique hash tuples plus the tuple-space data it expands on."""
    space = tuple_space(inst.ctx, inst.n)
    if V is None:
        V, p = _label_support(inst)
    uniq, inv = np.unique(space.hv, axis=0, return_inverse=True)
    return _kernel(uniq, V, p, inst.N), uniq, inv.ravel(), space


def ensemble_density_direct(inst: GmpInstance, mode: str = "auto", samples: int = 4096,
                            rng: np.random.Generator | None = None,
                            method: str = "kernel") -> DensityMatrix:
    """Average of ``|psi_v><psi_v|`` over the side's label distribution.

    ``mode="exact"`` enumerates the label support (at most 2^16 vectors),
    ``mode="monte_carlo"`` averages ``samples`` draws from ``rng`` and
    ``"auto"`` picks exact whenever the support fits. ``method="states"``
    builds every product state explicitly and mixes them, a slow reference
    path for cross-checking the kernel.
    """
    if mode == "auto":
        size = exact_support_size(inst)
        mode = "exact" if 0 < size <= MAX_SECRET_SUPPORT else "monte_carlo"
    if mode == "exact":
        V, p = _label_support(inst)
    elif mode == "monte_carlo":
        if rng is None:
            raise ValueError("Monte Carlo mode needs an rng")
        V = np.array([sample_labels(inst, rng) for _ in range(samples)], dtype=np.int64)
        p = np.full(samples, 1.0 / samples)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if method == "states":
        return _direct_by_states(inst, V, p)
    phi, _, inv, space = direct_kernel(inst, V, p)
    return _expand(phi, inv, space.alpha, space.layout)


def _direct_by_states(inst: GmpInstance, V: np.ndarray, p: np.ndarray) -> DensityMatrix:
    ensemble = []
    for v, pv in zip(V, p):
        states = [element_state(inst.ctx, int(x)) for x in v]
        prod = tensor_all(states)
        ensemble.append((float(pv), prod))
    space = tuple_space(inst.ctx, inst.n)
    rho = mix(ensemble)
    return DensityMatrix(space.layout, rho.matrix)


def ensemble_density_measured(inst: GmpInstance, via: str = "auto") -> DensityMatrix:
    """Post-measurement mixture of the product start state under the side's label function.

    ``via="records"`` runs the measurement and mixes the collapsed branches;
    ``via="dephase"`` zeroes mismatched entries directly. ``"auto"`` uses
    records up to the dense cap and dephasing beyond it.
    """
    space = tuple_space(inst.ctx, inst.n)
    state = PureState(space.layout, space.alpha)
    keys = side_keys(space, inst.M, inst.b)
    if via == "auto":
        via = "records" if space.dim <= DENSE_CAP else "dephase"
    if via == "records":
        return mix_records(measure_label_function(state, keys))
    if via == "dephase":
        return dephase(state, keys)
    raise ValueError(f"unknown route {via!r}")


@dataclass
class EnsembleComparison:
    """Two ensembles, their distances, and named bound values."""

    rho_direct: DensityMatrix
    rho_measured: DensityMatrix
    trace_dist: float
    frobenius: float
    bound_chain: dict = field(default_factory=dict)
    mode: str = "exact"
    standard_error: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    details: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        out = {
            "trace_dist": self.trace_dist,
            "frobenius": self.frobenius,
            "mode": self.mode,
            "standard_error": self.standard_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "bound_chain": dict(self.bound_chain),
        }
        out.update(self.details)
        return out


def verify_densmatrix_lemma(inst: GmpInstance, tol: float = 1e-9, mode: str = "auto",
                            samples: int = 4096, rng: np.random.Generator | None = None
                            ) -> EnsembleComparison:
    """Compare the direct and measured ensembles of one side.

    In Monte Carlo mode no pass/fail is asserted; the distance is reported
    with a batch standard error instead.
    """
    if mode == "auto":
        size = exact_support_size(inst)
        mode = "exact" if 0 < size <= MAX_SECRET_SUPPORT else "monte_carlo"
    measured = ensemble_density_measured(inst)
    if mode == "exact":
        direct = ensemble_density_direct(inst, "exact")
        dist = trace_distance(direct, measured)
        return EnsembleComparison(
            direct, measured, dist, frobenius_distance(direct, measured),
            mode="exact", tolerance=tol, passed=bool(dist <= tol),
            details={"b": inst.b, "pattern_sampling": inst.pattern_sampling},
        )
    if rng is None:
        raise ValueError("Monte Carlo mode needs an rng")
    per = max(1, samples // MC_BATCHES)
    batches = [ensemble_density_direct(inst, "monte_carlo", per, rng) for _ in range(MC_BATCHES)]
    dists = np.array([trace_distance(r, measured) for r in batches])
    layout = measured.layout
    direct = DensityMatrix(layout, sum(r.matrix for r in batches) / MC_BATCHES)
    dist = trace_distance(direct, measured)
    return EnsembleComparison(
        direct, measured, dist, frobenius_distance(direct, measured),
        mode="monte_carlo", standard_error=float(dists.std(ddof=1) / np.sqrt(MC_BATCHES)),
        tolerance=tol, passed=None,
        details={"b": inst.b, "pattern_sampling": inst.pattern_sampling,
                 "samples": per * MC_BATCHES},
    )


def offpattern_max(inst: GmpInstance) -> float:
    """Largest direct-ensemble entry between tuples the side's measurement separates.

    Computed from the unpruned kernel so values below the storage threshold
    are still seen.
    """
    phi, uniq, _, space = direct_kernel(inst)
    # keys are functions of the hash tuple, so compare them on unique tuples
    sub = TupleSpace(space.layout, uniq, np.ones(uniq.shape[0]))
    keys = side_keys(sub, inst.M, inst.b)
    _, codes = np.unique(keys, axis=0, return_inverse=True)
    codes = codes.ravel()
    mask = codes[:, None] != codes[None, :]
    if not mask.any():
        return 0.0
    scale = float(np.abs(space.alpha).max() ** 2)
    return float(np.abs(phi[mask]).max() * scale)


def same_partition(keys_a: np.ndarray, keys_b: np.ndarray) -> bool:
    """True when two label functions split the basis into the same blocks."""
    a = np.unique(keys_a, axis=0, return_inverse=True)[1].ravel()
    b = np.unique(keys_b, axis=0, return_inverse=True)[1].ravel()
    joint = np.unique(np.stack([a, b], axis=1), axis=0).shape[0]
    return bool(joint == a.max() + 1 == b.max() + 1)


@dataclass(frozen=True)
class GameReport:
    distance: float
    same_partition: bool
    outcomes_b0: int
    outcomes_b1: int

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.__dataclass_fields__}


def game_report(ctx: ActionContext, M: GroupMatrix) -> GameReport:
    """Game **G**: class-sum measurement (b=0) against ``M'^T``-of-class-sums (b=1)."""
    if M.N != ctx.N:
        raise ValueError("matrix and action moduli differ")
    space = tuple_space(ctx, M.rows)
    state = PureState(space.layout, space.alpha)
    ka = class_sums(space, M)
    kb = real_side_keys(space, M)
    rho0 = mix_records(measure_label_function(state, ka))
    rho1 = mix_records(measure_label_function(state, kb))
    return GameReport(
        trace_distance(rho0, rho1),
        same_partition(ka, kb),
        int(np.unique(ka, axis=0).shape[0]),
        int(np.unique(kb, axis=0).shape[0]),
    )


def game_distance(ctx: ActionContext, M: GroupMatrix) -> float:
    """Trace distance between the two branches of game **G**."""
    return game_report(ctx, M).distance
