"""The hash-based group action of Z_N on states over k-bit strings.

``g`` acts diagonally: the amplitude of ``|r>`` picks up the phase
``omega_N^(H(r) g)`` with ``omega_N = exp(2 pi i / N)``. The element states are
``|psi_g> = g * |phi>`` for a start state ``|phi>`` (uniform by default).

Acting never touches an auxiliary register, so the action is junk-free by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .finite_math import FiniteDistribution, lhl_epsilon, min_entropy
from .hash_families import HashFunction
from .quantum_core import Layout, PureState, bits, root_table

PAIR_SCAN_CAP = 4096


class ActionContext:
    """Modulus, domain width, hash function and start state of one action."""

    def __init__(self, hash: HashFunction, start_state: PureState | None = None):
        self.hash = hash
        self.N = hash.N
        self.k = hash.k
        self.layout = Layout([bits("x", self.k)])
        if start_state is None:
            start_state = PureState.uniform(self.layout)
        if start_state.layout != self.layout:
            raise ValueError(f"start state must live on one {self.k}-bit register")
        self.start_state = start_state

    @property
    def uniform_start(self) -> bool:
        a = self.start_state.amplitudes
        return bool(np.allclose(a, a[0], atol=1e-15, rtol=0))

    @cached_property
    def table(self) -> np.ndarray:
        return self.hash.materialize()

    @cached_property
    def roots(self) -> np.ndarray:
        return root_table(self.N)

    @cached_property
    def weights(self) -> np.ndarray:
        """Measurement distribution ``|alpha_x|^2`` of the start state."""
        return np.abs(self.start_state.amplitudes) ** 2

    @cached_property
    def pushforward(self) -> np.ndarray:
        """``p_i``: start-state mass of the preimage ``H^-1(i)``."""
        return np.bincount(self.table, weights=self.weights, minlength=self.N)

    @cached_property
    def overlap_profile(self) -> np.ndarray:
        """``Gamma(d) = <psi_0|psi_d> = sum_i p_i omega^(i d)`` for every d in Z_N."""
        p = self.pushforward
        gamma = self.N * np.fft.ifft(p)
        gamma[np.abs(gamma) < 1e-15] = 0.0
        return gamma

    def phases(self, g: int) -> np.ndarray:
        return self.roots[(self.table * (int(g) % self.N)) % self.N]

    def to_dict(self) -> dict:
        return {
            "hash": self.hash.spec.to_dict(),
            "k": self.k,
            "N": self.N,
            "uniform_start": self.uniform_start,
        }


def start(ctx: ActionContext) -> PureState:
    return ctx.start_state


def act(ctx: ActionContext, g: int, s: PureState) -> PureState:
    if s.layout != ctx.layout:
        raise ValueError(f"state must live on one {ctx.k}-bit register")
    if int(g) % ctx.N == 0:
        return s
    return PureState(s.layout, s.amplitudes * ctx.phases(g))


def element_state(ctx: ActionContext, g: int) -> PureState:
    return act(ctx, g, ctx.start_state)


def element_amplitudes(ctx: ActionContext, g: int) -> np.ndarray:
    """Amplitude vector of ``|psi_g>`` without wrapping it in a state object."""
    return ctx.start_state.amplitudes * ctx.phases(g)


@dataclass(frozen=True)
class OrthogonalityReport:
    """Worst overlap between distinct element states and what bounds it.

    ``mass_deviation`` is ``sum_i |p_i - 1/N|``, an upper bound on every
    overlap. ``lhl_bound`` is the extractor distance for the start state's
    min-entropy. ``sampled`` is true when only some differences were scanned.
    """

    N: int
    max_offdiag_overlap: float
    mass_deviation: float
    lhl_bound: float
    min_entropy: float
    sampled: bool
    differences_scanned: int

    @property
    def bound_holds(self) -> bool:
        return self.max_offdiag_overlap <= self.mass_deviation + 1e-9

    def to_dict(self) -> dict:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__}
        d["bound_holds"] = self.bound_holds
        return d


def orthogonality_audit(ctx: ActionContext, sample_pairs: int | None = None,
                        rng: np.random.Generator | None = None) -> OrthogonalityReport:
    """Scan ``|<psi_g|psi_g'>|`` over all ``g != g'``.

    The overlap depends only on ``d = g' - g``, so one value per nonzero
    difference is computed. Past ``PAIR_SCAN_CAP`` a random subset of
    ``sample_pairs`` differences is scanned instead and must be requested.
    """
    N = ctx.N
    gamma = ctx.overlap_profile
    if N > PAIR_SCAN_CAP:
        if sample_pairs is None or rng is None:
            raise ValueError(f"N={N} exceeds the scan cap {PAIR_SCAN_CAP}; pass sample_pairs and rng")
        diffs = rng.integers(1, N, size=sample_pairs)
        sampled = True
    else:
        diffs = np.arange(1, N)
        sampled = False
    worst = float(np.abs(gamma[diffs]).max()) if diffs.size else 0.0
    p = ctx.pushforward
    deviation = float(np.abs(p - 1.0 / N).sum())
    dist = FiniteDistribution(range(2**ctx.k), ctx.weights / ctx.weights.sum())
    h = min_entropy(dist)
    return OrthogonalityReport(
        N=N,
        max_offdiag_overlap=worst,
        mass_deviation=deviation,
        lhl_bound=lhl_epsilon(h, N),
        min_entropy=h,
        sampled=sampled,
        differences_scanned=int(diffs.size),
    )


def is_orthogonal(ctx: ActionContext, tol: float = 1e-6) -> bool:
    return orthogonality_audit(ctx).max_offdiag_overlap <= tol


def overlap_direct(ctx: ActionContext, g: int, gp: int) -> complex:
    """``<psi_g|psi_g'>`` by explicit vectors (reference for ``overlap_profile``)."""
    return complex(np.vdot(element_amplitudes(ctx, g), element_amplitudes(ctx, gp)))

