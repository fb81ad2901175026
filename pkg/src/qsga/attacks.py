"""Coset-sampling attacks on discrete logarithms.

One coset sample consumes a copy of ``|psi_0>`` and a copy of ``|psi_g>``.
Acting in superposition and discarding the two state registers leaves

    (|0, y0, y1> + |1, y0 - g, y1 + g>) / sqrt(2)

for uniform ``(y0, y1)``: a coset state of the order-two subgroup generated
by ``(1, -g, g)`` in ``G^2 x| Z_2``. For ``G = Z_2^n`` the subgroup is abelian
and Simon-style linear algebra recovers ``g``. For cyclic ``G`` an exact
maximum-likelihood search over all candidates stands in for the generic
hidden-subgroup reconstruction; both take time polynomial in ``|G|``.

Kuperberg's subexponential sieve is not implemented. It also needs the
action to be perfectly correct, orthogonal and junk-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .group_action import ActionContext, element_amplitudes, orthogonality_audit
from .hash_families import HashFunction
from .quantum_core import DensityMatrix, Layout, PureState, bits, mix, trace_distance, zn

ORTHOGONALITY_TOL = 1e-6
ORACLE_GROUP_CAP = 16
ML_GROUP_CAP = 256
TIE_TOL = 1e-9


class BooleanContext:
    """The hash action of ``Z_2^n`` on k-bit states.

    ``H`` takes values in ``[0, 2^n)``, read as bit vectors, and ``g`` acts by
    ``(-1)^(H(x) . g)``. The hash modulus must be a power of two.
    """

    def __init__(self, hash: HashFunction):
        N = hash.N
        if N < 2 or N & (N - 1):
            raise ValueError(f"boolean action needs a power-of-two modulus, got {N}")
        self.hash = hash
        self.N = N
        self.n = N.bit_length() - 1
        self.k = hash.k
        self.layout = Layout([bits("x", self.k)])

    @cached_property
    def table(self) -> np.ndarray:
        return self.hash.materialize()

    @cached_property
    def pushforward(self) -> np.ndarray:
        return np.bincount(self.table, minlength=self.N) / 2**self.k

    @cached_property
    def overlap_profile(self) -> np.ndarray:
        """``<psi_0|psi_d> = sum_i p_i (-1)^(i . d)`` for every ``d``."""
        return walsh_hadamard(self.pushforward)

    def phases(self, g: int) -> np.ndarray:
        return 1.0 - 2.0 * (_popcount(self.table & int(g)) & 1)

    def element_amplitudes(self, g: int) -> np.ndarray:
        return self.phases(g) / math.sqrt(2**self.k)

    def max_overlap(self) -> float:
        gamma = self.overlap_profile
        return float(np.abs(gamma[1:]).max()) if self.N > 1 else 0.0

    def to_dict(self) -> dict:
        return {"hash": self.hash.spec.to_dict(), "k": self.k, "n": self.n}


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out += a & 1
        a = a >> 1
    return out


def walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalized transform ``sum_i v_i (-1)^(i . d)`` of a length-2^m vector."""
    v = np.asarray(v)
    m = v.shape[0].bit_length() - 1
    if v.shape[0] != 2**m:
        raise ValueError("length must be a power of two")
    a = v.astype(complex if np.iscomplexobj(v) else float).reshape((2,) * m) if m else v.copy()
    for axis in range(m):
        a0 = np.take(a, 0, axis=axis)
        a1 = np.take(a, 1, axis=axis)
        a = np.stack([a0 + a1, a0 - a1], axis=axis)
    return a.reshape(-1)


def _kind(ctx) -> str:
    return "boolean" if isinstance(ctx, BooleanContext) else "cyclic"


def _ops(kind: str, N: int):
    if kind == "boolean":
        return (lambda a, b: a ^ b), (lambda a, b: a ^ b)
    return (lambda a, b: (a + b) % N), (lambda a, b: (a - b) % N)


def _amplitudes(ctx, g: int) -> np.ndarray:
    if isinstance(ctx, BooleanContext):
        return ctx.element_amplitudes(g)
    return element_amplitudes(ctx, g)


def action_overlap(ctx) -> float:
    """Worst ``|<psi_g|psi_g'>|`` over ``g != g'``."""
    if isinstance(ctx, BooleanContext):
        return ctx.max_overlap()
    return orthogonality_audit(ctx).max_offdiag_overlap


def coset_layout(kind: str, N: int) -> Layout:
    if kind == "boolean":
        n = N.bit_length() - 1
        return Layout([bits("b", 1), bits("h0", n), bits("h1", n)])
    return Layout([bits("b", 1), zn("h0", N), zn("h1", N)])


@dataclass(frozen=True)
class CosetSample:
    """A collapsed three-register coset state.

    ``hidden_g`` is kept for test oracles only and recovery code never reads it.
    """

    kind: str
    N: int
    state: PureState
    hidden_g: int = field(repr=False)

    def branches(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Labels of the ``b = 0`` and ``b = 1`` basis vectors in the support."""
        labels = [self.state.layout.label(i) for i in self.state.support()]
        zero = [lab for lab in labels if lab[0] == 0]
        one = [lab for lab in labels if lab[0] == 1]
        if len(zero) != 1 or len(one) != 1:
            raise ValueError("coset sample must have exactly one basis vector per b branch")
        return zero[0], one[0]


def coset_state(kind: str, N: int, g: int, y0: int, y1: int) -> PureState:
    """``(|0, y0, y1> + |1, y0 - g, y1 + g>) / sqrt(2)``."""
    add, sub = _ops(kind, N)
    layout = coset_layout(kind, N)
    amps = {(0, y0, y1): 1.0}
    other = (1, sub(y0, g), add(y1, g))
    amps[other] = amps.get(other, 0.0) + 1.0
    return PureState.from_map(layout, amps, normalize=True)


def check_orthogonal(ctx, tol: float = ORTHOGONALITY_TOL) -> float:
    worst = action_overlap(ctx)
    if worst > tol:
        raise ValueError(
            f"coset sampling needs an orthogonal action; the audit found overlap {worst:.3e} > {tol:.0e}")
    return worst


def coset_sample(ctx, g: int, rng: np.random.Generator, checked: bool = False) -> CosetSample:
    """One coset sample for hidden ``g``.

    The discarded registers hold ``|psi_y0> (x) |psi_(y1 + g)>``. For an
    orthogonal action these are orthonormal for distinct labels, so discarding
    them acts like measuring ``(y0, y1)``, which is uniform over ``G^2``.
    Pass ``checked=True`` to skip the orthogonality audit when the caller has
    already run it.
    """
    if not checked:
        check_orthogonal(ctx)
    N = ctx.N
    g = int(g) % N
    y0, y1 = (int(v) for v in rng.integers(0, N, size=2))
    kind = _kind(ctx)
    return CosetSample(kind, N, coset_state(kind, N, g, y0, y1), g)


def superposed_state(ctx, g: int) -> np.ndarray:
    """Rows of ``|tau_c>``: index ``(b, h0, h1)``, columns the two state registers.

    ``tau_c = (1 / (sqrt(2) |G|)) sum |b, h0, h1> (h0 * psi^(b)) (h1 * psi^(1-b))``
    with ``psi^(0) = psi_0`` and ``psi^(1) = psi_g``.
    """
    N = ctx.N
    add, _ = _ops(_kind(ctx), N)
    elems = [_amplitudes(ctx, y) for y in range(N)]
    rows = []
    norm = 1.0 / (math.sqrt(2) * N)
    for b in (0, 1):
        for h0 in range(N):
            left = elems[add(h0, g) if b == 1 else h0]
            for h1 in range(N):
                right = elems[h1 if b == 1 else add(h1, g)]
                rows.append(norm * np.kron(left, right))
    return np.array(rows)


def discard_oracle(ctx, g: int) -> float:
    """Trace distance between the exact reduced state of ``|tau_c>`` and the
    uniform mixture of coset samples; small groups only."""
    N = ctx.N
    if N > ORACLE_GROUP_CAP:
        raise ValueError(f"the partial-trace oracle is limited to |G| <= {ORACLE_GROUP_CAP}")
    T = superposed_state(ctx, int(g) % N)
    kind = _kind(ctx)
    layout = coset_layout(kind, N)
    reduced = DensityMatrix(layout, T @ T.conj().T)
    p = 1.0 / N**2
    ensemble = mix([(p, coset_state(kind, N, g, y0, y1)) for y0 in range(N) for y1 in range(N)])
    return trace_distance(reduced, ensemble)


def fourier_outcome_probs(sample: CosetSample, y_basis: bool = False) -> np.ndarray:
    """Outcome law after the Fourier transform of every register.

    The group registers get the QFT over ``G`` (Walsh-Hadamard for ``Z_2^n``).
    The ``b`` qubit is measured in the X basis, or in the Y basis when
    ``y_basis`` is set. Returns probabilities over ``(c, a0, a1)`` in layout order.
    """
    N = sample.N
    s = sample.state
    a = np.arange(N)
    out = np.zeros((2, N, N), dtype=complex)
    # X basis: |c> <- (|0> + (-1)^c |1>)/sqrt 2; Y basis: (|0> + (-1)^c i |1>)/sqrt 2
    unit = 1j if y_basis else 1.0
    for idx in s.support():
        b, y0, y1 = s.layout.label(idx)
        amp = s.amplitudes[idx]
        if sample.kind == "boolean":
            chi0 = 1.0 - 2.0 * (_popcount(a & y0) & 1)
            chi1 = 1.0 - 2.0 * (_popcount(a & y1) & 1)
        else:
            chi0 = np.exp(2j * np.pi * a * y0 / N)
            chi1 = np.exp(2j * np.pi * a * y1 / N)
        grid = np.outer(chi0, chi1) / N
        for c in (0, 1):
            coeff = 1.0 if b == 0 else np.conj(((-1) ** c) * unit)
            out[c] += amp * coeff / math.sqrt(2) * grid
    probs = np.abs(out) ** 2
    return probs / probs.sum()


def measure_fourier(sample: CosetSample, rng: np.random.Generator, y_basis: bool = False
                    ) -> tuple[int, int, int]:
    probs = fourier_outcome_probs(sample, y_basis).ravel()
    idx = int(rng.choice(probs.shape[0], p=probs))
    c, rest = divmod(idx, sample.N * sample.N)
    a0, a1 = divmod(rest, sample.N)
    return c, a0, a1


def _bits_of(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def gf2_nullspace(rows: np.ndarray) -> np.ndarray:
    """Basis (as rows) of ``{v : A v = 0}`` over F_2."""
    A = np.array(rows, dtype=np.uint8) % 2
    if A.ndim == 1:
        A = A.reshape(0, -1) if A.size == 0 else A[None, :]
    r, cols = A.shape
    pivots = []
    row = 0
    for col in range(cols):
        hit = np.flatnonzero(A[row:, col]) if row < r else np.array([], dtype=int)
        if hit.size == 0:
            continue
        p = row + int(hit[0])
        A[[row, p]] = A[[p, row]]
        mask = A[:, col].astype(bool)
        mask[row] = False
        A[mask] ^= A[row]
        pivots.append(col)
        row += 1
        if row == r:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for i, pc in enumerate(pivots):
            v[pc] = A[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


@dataclass(frozen=True)
class SimonResult:
    recovered: int | None
    rank: int
    samples_used: int

    @property
    def success(self) -> bool:
        return self.recovered is not None


def simon_from_outcomes(outcomes: list[tuple[int, int, int]], n: int) -> SimonResult:
    """Solve for the period ``(1, g, g)`` of ``Z_2^(1+2n)`` from measured vectors."""
    width = 1 + 2 * n
    rows = [[c] + _bits_of(a0, n) + _bits_of(a1, n) for c, a0, a1 in outcomes]
    A = np.array(rows, dtype=np.uint8).reshape(len(rows), width)
    null = gf2_nullspace(A)
    rank = width - null.shape[0]
    if null.shape[0] != 1:
        return SimonResult(None, rank, len(outcomes))
    v = null[0]
    g0 = int("".join(map(str, v[1:1 + n])) or "0", 2)
    g1 = int("".join(map(str, v[1 + n:])) or "0", 2)
    if v[0] != 1 or g0 != g1:
        return SimonResult(None, rank, len(outcomes))
    return SimonResult(g0, rank, len(outcomes))


def simon_recover(samples: list[CosetSample], rng: np.random.Generator) -> SimonResult:
    """Recover ``g`` over ``Z_2^n``, or report failure when the rank stays short.

    Each sample is Walsh-Hadamard transformed and measured, giving a vector
    orthogonal to ``(1, g, g)``. Once the vectors span the 2n-dimensional
    complement, the period is the unique nonzero null vector.
    """
    if not samples:
        return SimonResult(None, 0, 0)
    if any(s.kind != "boolean" for s in samples):
        raise ValueError("simon_recover needs boolean coset samples")
    n = samples[0].N.bit_length() - 1
    outcomes = [measure_fourier(s, rng) for s in samples]
    return simon_from_outcomes(outcomes, n)


def ml_outcomes(samples: list[CosetSample], rng: np.random.Generator
                ) -> list[tuple[int, int, int, int]]:
    """Measure each cyclic sample; the ``b`` basis (0 = X, 1 = Y) is a fair coin.

    Returns ``(basis, c, a0, a1)`` per sample.
    """
    out = []
    for s in samples:
        basis = int(rng.integers(0, 2))
        out.append((basis,) + measure_fourier(s, rng, y_basis=bool(basis)))
    return out


def ml_log_likelihood(outcomes: list[tuple[int, int, int, int]], N: int) -> np.ndarray:
    """Exact log-likelihood of every candidate ``g'`` in ``Z_N``.

    Given the transformed group outcomes, the ``b`` qubit is
    ``(|0> + e^(i theta)|1>)/sqrt 2`` with ``theta = 2 pi (a1 - a0) g' / N``;
    X gives ``c = 0`` with probability ``(1 + cos theta)/2`` and Y with
    ``(1 + sin theta)/2``. The group outcomes are uniform whatever ``g'`` is.
    Outcomes are sorted first so the sum does not depend on sample order.
    """
    cand = np.arange(N)
    ll = np.zeros(N)
    if not outcomes:
        return ll
    obs = np.array(sorted(outcomes), dtype=np.int64)
    basis, c, a0, a1 = obs.T
    d = (a1 - a0) % N
    theta = 2 * np.pi * np.outer(d, cand) / N
    trig = np.where(basis[:, None] == 1, np.sin(theta), np.cos(theta))
    sign = np.where(c[:, None] == 0, 1.0, -1.0)
    p = np.clip(0.5 * (1.0 + sign * trig), 0.0, 1.0)
    p[p < 1e-15] = 0.0
    with np.errstate(divide="ignore"):
        return np.log(p).sum(axis=0)


def ml_from_outcomes(outcomes: list[tuple[int, int, int, int]], N: int) -> int:
    """Maximum-likelihood candidate; the smallest one wins ties."""
    ll = ml_log_likelihood(outcomes, N)
    best = ll.max()
    return int(np.flatnonzero(ll >= best - TIE_TOL)[0])


def ml_dlog_recover(samples: list[CosetSample], rng: np.random.Generator, N: int | None = None) -> int:
    """Brute-force maximum-likelihood discrete log over ``Z_N`` from coset samples.

    Measuring the ``b`` qubit only in the X basis leaves ``g`` and ``-g``
    indistinguishable, so each sample picks the X or Y basis at random.
    ``N`` is only needed when ``samples`` is empty.
    """
    if samples:
        if any(s.kind != "cyclic" for s in samples):
            raise ValueError("ml_dlog_recover needs cyclic coset samples")
        N = samples[0].N
    if N is None:
        raise ValueError("pass N when there are no samples")
    if N > ML_GROUP_CAP:
        raise ValueError(f"maximum-likelihood search is limited to N <= {ML_GROUP_CAP}")
    return ml_from_outcomes(ml_outcomes(samples, rng), N)


@dataclass
class DlogExperimentReport:
    kind: str
    N: int
    trials: int
    successes: int
    samples_per_trial: int
    planted: list[int]
    recovered: list[int | None]
    copies_consumed: int
    max_overlap: float

    def __post_init__(self) -> None:
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def rows(self) -> list[dict]:
        return [
            {"trial": i, "planted": g, "recovered": r, "success": r == g}
            for i, (g, r) in enumerate(zip(self.planted, self.recovered))
        ]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "N": self.N,
            "trials": self.trials,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "samples_per_trial": self.samples_per_trial,
            "copies_consumed": self.copies_consumed,
            "max_overlap": self.max_overlap,
        }


def dlog_trial(ctx, ell: int, rng: np.random.Generator) -> tuple[int, int | None]:
    """Plant ``g``, draw ``ell`` coset samples and run the matching recovery."""
    g = int(rng.integers(0, ctx.N))
    samples = [coset_sample(ctx, g, rng, checked=True) for _ in range(ell)]
    if isinstance(ctx, BooleanContext):
        return g, simon_recover(samples, rng).recovered
    return g, ml_dlog_recover(samples, rng, N=ctx.N)


def dlog_experiment(ctx, ell: int, trials: int, rng: np.random.Generator) -> DlogExperimentReport:
    """End-to-end discrete-log recovery rate; each trial gets its own RNG stream.

    Each coset sample uses one copy of ``|psi_g>`` and one fresh copy of
    ``|psi_0>`` from the start procedure.
    """
    worst = check_orthogonal(ctx)
    seed = int(rng.integers(0, 2**63))
    streams = np.random.SeedSequence(seed).spawn(trials)
    planted, recovered = [], []
    for ss in streams:
        g, r = dlog_trial(ctx, ell, np.random.default_rng(ss))
        planted.append(g)
        recovered.append(r)
    successes = sum(int(r == g) for g, r in zip(planted, recovered))
    return DlogExperimentReport(_kind(ctx), ctx.N, trials, successes, ell, planted, recovered,
                                ell * trials, worst)

