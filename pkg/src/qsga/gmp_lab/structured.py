"""Goodness of matrices for non-uniform secrets and the structured-ensemble bounds.

For hash-difference vectors ``z`` (one coordinate per row), a matrix ``M`` is
good at level ``eps`` when every nonzero realizable ``z`` makes
``<z M, s>`` at most ``sqrt(eps)`` away from uniform in total variation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..finite_math import GroupMatrix, tv_from_uniform
from ..hash_families import HashFunction
from ..quantum_core import trace_norm_hermitian
from .ensembles import (
    EnsembleComparison,
    ensemble_density_direct,
    ensemble_density_measured,
    tuple_space,
)
from .instance import GmpInstance, SecretDistribution

DEFAULT_PAIR_BUDGET = 2**16


@dataclass(frozen=True)
class GoodnessReport:
    """Worst total-variation distance of ``<z M, s>`` from uniform.

    ``tested_pairs`` counts the nonzero difference vectors ``z`` examined;
    ``exhaustive`` is false when they were sampled under a budget.
    """

    epsilon_target: float
    worst_tv: float
    is_good: bool
    tested_pairs: int
    distinct_functionals: int
    exhaustive: bool

    @property
    def threshold(self) -> float:
        return math.sqrt(self.epsilon_target)

    def to_dict(self) -> dict:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__}
        d["threshold"] = self.threshold
        return d


def hash_differences(h: HashFunction) -> np.ndarray:
    """All values ``H(a) - H(b) mod N`` realized on the domain."""
    img = np.unique(h.materialize())
    return np.unique((img[:, None] - img[None, :]) % h.N)


def inner_product_laws(W: np.ndarray, secrets: SecretDistribution, N: int) -> np.ndarray:
    """Row ``r`` is the law of ``<W[r], s> mod N`` over the secret distribution."""
    W = np.atleast_2d(W) % N
    laws = secrets.coordinate_laws(N)
    if laws is None:
        S, p = secrets.enumerate(N)
        vals = (W @ S.T) % N
        out = np.zeros((W.shape[0], N))
        for r in range(W.shape[0]):
            out[r] = np.bincount(vals[r], weights=p, minlength=N)
        return out
    spectrum = np.ones((W.shape[0], N), dtype=complex)
    grid = np.arange(N)
    for i, law in enumerate(laws):
        # law of w_i * s_i: push the coordinate law through multiplication by w_i
        idx = (W[:, i][:, None] * grid[None, :]) % N
        coord = np.zeros((W.shape[0], N))
        np.add.at(coord, (np.repeat(np.arange(W.shape[0]), N), idx.ravel()),
                  np.tile(law, W.shape[0]))
        spectrum *= np.fft.fft(coord, axis=1)
    out = np.fft.ifft(spectrum, axis=1).real
    out[np.abs(out) < 1e-15] = 0.0
    return out


def goodness(M: GroupMatrix, secrets: SecretDistribution, h: HashFunction, epsilon: float,
             pair_budget: int = DEFAULT_PAIR_BUDGET,
             rng: np.random.Generator | None = None) -> GoodnessReport:
    """Scan every realizable nonzero ``z`` (or ``pair_budget`` random ones)."""
    if h.N != M.N:
        raise ValueError("hash and matrix moduli differ")
    N, n = M.N, M.rows
    D = hash_differences(h)
    total = D.shape[0] ** n - 1
    if total <= pair_budget:
        Z = D[np.indices((D.shape[0],) * n).reshape(n, -1).T]
        Z = Z[np.any(Z != 0, axis=1)]
        exhaustive = True
    else:
        if rng is None:
            raise ValueError(f"{total} difference vectors exceed the budget; pass an rng to sample")
        Z = D[rng.integers(0, D.shape[0], size=(pair_budget, n))]
        Z = Z[np.any(Z != 0, axis=1)]
        exhaustive = False
    if Z.shape[0] == 0:
        return GoodnessReport(epsilon, 0.0, True, 0, 0, exhaustive)
    W = np.unique((Z @ M.entries) % N, axis=0)
    laws = inner_product_laws(W, secrets, N)
    tvs = np.array([tv_from_uniform(row) for row in laws])
    worst = float(tvs.max())
    return GoodnessReport(epsilon, worst, bool(worst <= math.sqrt(epsilon)),
                          int(Z.shape[0]), int(W.shape[0]), exhaustive)


@dataclass
class StructuredReport:
    comparison: EnsembleComparison
    goodness: GoodnessReport
    entry_cap: float
    max_offpattern_entry: float
    entry_cap_ok: bool | None
    chain_ok: bool
    nonzero_difference_pairs: int
    details: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        out = self.comparison.metrics()
        out.update({
            "goodness": self.goodness.to_dict(),
            "entry_cap": self.entry_cap,
            "max_offpattern_entry": self.max_offpattern_entry,
            "entry_cap_ok": self.entry_cap_ok,
            "chain_ok": self.chain_ok,
            "nonzero_difference_pairs": self.nonzero_difference_pairs,
        })
        out.update(self.details)
        return out


def structured_distance(inst: GmpInstance, epsilon: float, pair_budget: int = DEFAULT_PAIR_BUDGET,
                        rng: np.random.Generator | None = None) -> StructuredReport:
    """Compare the ``M s`` ensemble with its ``mu``-pattern dephased reference.

    ``mu_x = (H(x_1), ..., H(x_n)) M``; the reference keeps entries with
    ``mu_x = mu_x'`` at their uniform-secret values. The bound chain reports

    * ``trace_norm``: sum of absolute eigenvalues of the difference;
    * ``frobenius_cap``: ``2^(nk/2)`` times the Frobenius norm;
    * ``entrywise_formula``: ``2^(-nk/2) sqrt(|G| 4 eps + 2^(2kn) - |G|)``,
      valid when the matrix is good;
    * ``conditional_as_printed``: ``2^(nk/2) sqrt(eps) / 2``;
    * ``conditional_recomputed``: ``2^(-nk/2) sqrt(2^(2kn) 4 eps)``, which is
      what the preceding line evaluates to when ``|G| = 2^(2kn)``.
    """
    if inst.b != 0:
        inst = inst.side(0)
    rho = ensemble_density_direct(inst)
    rho_ref = ensemble_density_measured(inst)
    delta = (rho.matrix - rho_ref.matrix).toarray()
    tnorm = trace_norm_hermitian(delta)
    frob = float(np.sqrt((np.abs(delta) ** 2).sum()))
    space = tuple_space(inst.ctx, inst.n)
    _, counts = np.unique(space.hv, axis=0, return_counts=True)
    dim = space.dim
    G = int(dim * dim - (counts.astype(np.int64) ** 2).sum())
    kn = inst.k * inst.n
    chain = {
        "trace_norm": tnorm,
        "frobenius_cap": 2 ** (kn / 2) * frob,
        "entrywise_formula": 2 ** (-kn / 2) * math.sqrt(G * 4 * epsilon + 2 ** (2 * kn) - G),
        "conditional_as_printed": 2 ** (kn / 2) * math.sqrt(epsilon) / 2,
        "conditional_recomputed": 2 ** (-kn / 2) * math.sqrt(2 ** (2 * kn) * 4 * epsilon),
    }
    good = goodness(inst.M, inst.secrets, inst.ctx.hash, epsilon, pair_budget, rng)
    scale = float(np.abs(space.alpha).max() ** 2)
    cap = 2 * math.sqrt(epsilon) * scale
    # entries with z = 0 have mu_x = mu_x' and vanish, so the max runs over G
    max_entry = float(np.abs(delta).max()) if delta.size else 0.0
    cap_ok = bool(max_entry <= cap + 1e-12) if good.is_good else None
    chain_ok = bool(tnorm <= chain["frobenius_cap"] + 1e-9)
    comp = EnsembleComparison(
        rho, rho_ref, 0.5 * tnorm, frob, chain,
        details={"epsilon": epsilon, "secrets": inst.secrets.kind},
    )
    return StructuredReport(comp, good, cap, max_entry, cap_ok, chain_ok, G)


@dataclass(frozen=True)
class GoodFractionReport:
    good: int
    trials: int
    fraction: float
    sigma: float
    ci_low: float
    ci_high: float
    epsilon: float
    exhaustive: bool

    @property
    def target(self) -> float:
        return 1.0 - math.sqrt(self.epsilon)

    def to_dict(self) -> dict:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__}
        d["target"] = self.target
        return d


def good_fraction(n: int, m: int, N: int, secrets: SecretDistribution, h: HashFunction,
                  epsilon: float, matrix_trials: int, rng: np.random.Generator,
                  exhaustive: bool = False, pair_budget: int = DEFAULT_PAIR_BUDGET
                  ) -> GoodFractionReport:
    """Fraction of uniform ``n x m`` matrices that are good at level ``epsilon``.

    With ``exhaustive=True`` every matrix in Z_N^(n x m) is checked (at most
    2^16 of them) and the fraction is exact.
    """
    if exhaustive:
        total = N ** (n * m)
        if total > 2**16:
            raise ValueError(f"{total} matrices are too many to enumerate")
        mats = np.indices((N,) * (n * m)).reshape(n * m, -1).T.reshape(-1, n, m)
    else:
        if matrix_trials < 30:
            raise ValueError("use at least 30 matrix trials")
        mats = rng.integers(0, N, size=(matrix_trials, n, m))
    good = 0
    for A in mats:
        rep = goodness(GroupMatrix(A, N), secrets, h, epsilon, pair_budget, rng)
        good += int(rep.is_good)
    T = len(mats)
    frac = good / T
    ci = stats.binomtest(good, T).proportion_ci(confidence_level=0.95, method="wilson")
    return GoodFractionReport(good, T, frac, math.sqrt(frac * (1 - frac) / T),
                              float(ci.low), float(ci.high), epsilon, exhaustive)
