"""Injectivity of ``M^T``-of-class-sums and the hybrid distances built on it."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..finite_math import EqualityPattern, GroupMatrix, equality_pattern
from ..group_action import ActionContext
from ..hash_families import HashFunction, small_range_query_bound, small_range_tv
from ..quantum_core import PureState, dephase, trace_distance
from .ensembles import class_sums, real_side_keys, tuple_space
from .instance import class_indicator

EXHAUSTIVE_PAIR_CAP = 2**20


@dataclass(frozen=True)
class MhInjReport:
    """Collisions of ``M^T y`` between tuples that differ beyond within-class reordering.

    ``count`` is over ordered pairs ``(x, x')``; ``fraction`` divides by all
    ``2^(2kn)`` ordered pairs; ``reference_bound`` is ``2^(2kn) / N``.
    """

    count: int
    total_pairs: int
    fraction: float
    reference_bound: float
    hypothesis_ok: bool
    exhaustive: bool
    standard_error: float | None = None

    @property
    def within_bound(self) -> bool:
        return self.fraction <= self.reference_bound

    def to_dict(self) -> dict:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__}
        d["within_bound"] = self.within_bound
        return d


def canonical_codes(values: np.ndarray, pattern: EqualityPattern) -> np.ndarray:
    """Integer code per tuple identifying it up to reordering inside each class."""
    parts = [np.sort(values[:, list(c)], axis=1) for c in pattern.classes]
    canon = np.concatenate(parts, axis=1)
    return np.unique(canon, axis=0, return_inverse=True)[1].ravel()


def _codes(keys: np.ndarray) -> np.ndarray:
    return np.unique(keys, axis=0, return_inverse=True)[1].ravel()


def mh_injectivity(M: GroupMatrix, h: HashFunction, pattern: EqualityPattern | None = None,
                   exhaustive: bool | None = None, trials: int = 100_000,
                   rng: np.random.Generator | None = None) -> MhInjReport:
    """Count collisions of ``M^T (class sums of H)`` across tuples.

    ``M`` is the ``j x m`` matrix of distinct rows. ``pattern`` partitions the
    ``n`` tuple positions into ``j`` classes; by default every position is
    its own class. Zero or repeated rows violate the hypothesis; the count
    is still reported, with a warning.
    """
    if pattern is None:
        pattern = EqualityPattern(tuple((i,) for i in range(M.rows)))
    if pattern.j != M.rows:
        raise ValueError(f"pattern has {pattern.j} classes but M has {M.rows} rows")
    rows = M.entries
    hyp = bool(np.all(np.any(rows != 0, axis=1)) and equality_pattern(M).j == M.rows)
    if not hyp:
        warnings.warn("M has a zero or repeated row; the injectivity hypothesis does not hold",
                      stacklevel=2)
    n, k, N = pattern.n, h.k, h.N
    total = 2 ** (2 * k * n)
    if exhaustive is None:
        exhaustive = total <= EXHAUSTIVE_PAIR_CAP
    if exhaustive and total > EXHAUSTIVE_PAIR_CAP:
        raise ValueError(f"2^(2kn) = {total} pairs exceed the exhaustive cap")
    ctx = ActionContext(h)
    space = tuple_space(ctx, n)
    labels = space.layout.labels_array()
    y = (space.hv @ class_indicator(pattern)) % N
    key = _codes((y @ rows) % N)
    canon = canonical_codes(labels, pattern)
    bound = total / N
    if exhaustive:
        same_key = int((np.bincount(key).astype(np.int64) ** 2).sum())
        same_canon = int((np.bincount(canon).astype(np.int64) ** 2).sum())
        count = same_key - same_canon
        return MhInjReport(count, total, count / total, bound, hyp, True)
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    a = rng.integers(0, space.dim, size=trials)
    b = rng.integers(0, space.dim, size=trials)
    hits = (key[a] == key[b]) & (canon[a] != canon[b])
    frac = float(hits.mean())
    return MhInjReport(int(hits.sum()), trials, frac, bound, hyp, False,
                       math.sqrt(frac * (1 - frac) / trials))


@dataclass(frozen=True)
class HybridStep:
    """Distance between adjacent hybrids; ``None`` when the step is an assumption."""

    name: str
    distance: float | None
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "distance": self.distance, "note": self.note}


def _dephased(ctx: ActionContext, n: int, keys: np.ndarray):
    space = tuple_space(ctx, n)
    return dephase(PureState(space.layout, space.alpha), keys)


def _inner_values(h: HashFunction, labels: np.ndarray) -> np.ndarray:
    if h.family == "lossy_composed":
        return h.inner[labels]
    if h.family == "small_range":
        buckets = np.array([h.bucket(x) for x in range(2**h.k)], dtype=np.int64)
        return buckets[labels]
    return labels


def _measurement_steps(h: HashFunction, M: GroupMatrix, inner_name: str) -> list[HybridStep]:
    ctx = ActionContext(h)
    space = tuple_space(ctx, M.rows)
    pattern = equality_pattern(M)
    canon = canonical_codes(_inner_values(h, space.layout.labels_array()), pattern)
    rho_real = _dephased(ctx, M.rows, real_side_keys(space, M))
    rho_canon = _dephased(ctx, M.rows, canon)
    rho_sums = _dephased(ctx, M.rows, class_sums(space, M))
    return [
        HybridStep(f"M'^T class sums -> class multisets of {inner_name}",
                   trace_distance(rho_real, rho_canon)),
        HybridStep(f"class multisets of {inner_name} -> class sums of H",
                   trace_distance(rho_canon, rho_sums)),
    ]


def hybrid_chain(kind: str, M: GroupMatrix, hashes: dict, queries: int | None = None
                 ) -> list[HybridStep]:
    """Trace distances between adjacent hybrids for one hash construction.

    ``kind="expanding"`` takes ``hashes={"H": h}``; ``"lossy"`` takes
    ``{"injective": h_inj, "lossy": h_lossy}``; ``"ro"`` takes
    ``{"ro": h_table, "sr": h_small_range}``. Steps that swap one hash
    function for another are not per-instance quantities. For the lossy
    swap they rest on mode indistinguishability and are left as ``None``;
    for the small-range swap the exact law-level distance is attached when
    the parameters are tiny, and ``queries`` adds the query bound.
    """
    if kind == "expanding":
        return _measurement_steps(hashes["H"], M, "x")
    if kind == "lossy":
        steps = [HybridStep("injective key -> lossy key", None,
                            "mode indistinguishability is assumed, not simulated")]
        steps += _measurement_steps(hashes["lossy"], M, "f(x)")
        steps.append(HybridStep("lossy key -> injective key", None,
                                "mode indistinguishability is assumed, not simulated"))
        return steps
    if kind == "ro":
        sr = hashes["sr"]
        r = sr.spec.params["r"]
        note = []
        law_tv = None
        try:
            law_tv = small_range_tv(sr.k, sr.N, r)
            note.append("exact law-level TV distance")
        except ValueError:
            note.append("law-level distance too large to enumerate")
        if queries is not None:
            note.append(f"query bound {small_range_query_bound(queries, r):.6g}")
        swap = HybridStep("random table -> small range", law_tv, "; ".join(note))
        steps = [swap]
        steps += _measurement_steps(sr, M, "f(x)")
        steps.append(HybridStep("small range -> random table", law_tv, swap.note))
        return steps
    raise ValueError(f"unknown hybrid kind {kind!r}")
