"""Arithmetic over Z_N, row-equality patterns, and information-theoretic helpers.

Matrices follow one shape convention throughout the package: ``n`` rows (the
number of output states) by ``m`` columns (the secret length), so that
``matvec(M, s)`` has length ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

PROB_TOL = 1e-12


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class Modulus:
    """The group order N of Z_N.

    Composite moduli are accepted; ``prime`` records whether field-based
    arguments (polynomial hashing, invertibility) apply.
    """

    N: int
    prime: bool = field(init=False)

    def __post_init__(self) -> None:
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise ValueError(f"modulus must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "prime", is_prime(self.N))

    def reduce(self, values) -> np.ndarray:
        return np.mod(np.asarray(values, dtype=np.int64), self.N)

    def __int__(self) -> int:
        return self.N


def as_modulus(N: int | Modulus) -> Modulus:
    return N if isinstance(N, Modulus) else Modulus(int(N))


class GroupMatrix:
    """An ``n x m`` matrix with entries reduced into [0, N)."""

    __slots__ = ("modulus", "entries")

    def __init__(self, entries, modulus: int | Modulus):
        mod = as_modulus(modulus)
        arr = np.array(entries, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"matrix must be 2-D and nonempty, got shape {arr.shape}")
        arr = np.mod(arr, mod.N)
        arr.setflags(write=False)
        self.modulus = mod
        self.entries = arr

    @property
    def N(self) -> int:
        return self.modulus.N

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def random(cls, n: int, m: int, modulus, rng: np.random.Generator) -> "GroupMatrix":
        mod = as_modulus(modulus)
        return cls(rng.integers(0, mod.N, size=(n, m)), mod)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def to_dict(self) -> dict:
        return {"N": self.N, "entries": self.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupMatrix":
        return cls(d["entries"], d["N"])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupMatrix)
            and self.N == other.N
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self) -> int:
        return hash((self.N, self.entries.tobytes(), self.entries.shape))

    def __repr__(self) -> str:
        return f"GroupMatrix(N={self.N}, entries={self.tolist()})"


def matvec(M: GroupMatrix, s) -> np.ndarray:
    """Return ``M s mod N`` (length ``n``); integer or Z_N inputs both accepted."""
    vec = np.asarray(s, dtype=np.int64)
    if vec.ndim != 1 or vec.shape[0] != M.cols:
        raise ValueError(
            f"dimension mismatch: M is {M.rows}x{M.cols}, s has shape {vec.shape}"
        )
    vec = np.mod(vec, M.N)
    # entries < N <= 2^31 keeps the products inside int64 for moderate m
    return np.mod(M.entries @ vec, M.N)


@dataclass(frozen=True)
class EqualityPattern:
    """Partition of row indices into classes of identical rows.

    Classes are listed in first-occurrence order and use 0-based indices.
    """

    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: list[int] = []
        for c in self.classes:
            if not c:
                raise ValueError("equality classes must be nonempty")
            seen.extend(c)
        if sorted(seen) != list(range(len(seen))):
            raise ValueError(f"classes {self.classes} do not partition 0..{len(seen) - 1}")

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.classes)

    @property
    def j(self) -> int:
        return len(self.classes)

    def class_of(self) -> np.ndarray:
        """Array mapping each index to its class number."""
        out = np.empty(self.n, dtype=np.int64)
        for ci, c in enumerate(self.classes):
            out[list(c)] = ci
        return out

    @classmethod
    def from_sequence(cls, items: Sequence[Hashable]) -> "EqualityPattern":
        first: dict = {}
        groups: list[list[int]] = []
        for i, item in enumerate(items):
            key = item
            if key not in first:
                first[key] = len(groups)
                groups.append([])
            groups[first[key]].append(i)
        return cls(tuple(tuple(g) for g in groups))


def equality_pattern(M: GroupMatrix) -> EqualityPattern:
    return EqualityPattern.from_sequence([row.tobytes() for row in M.entries])


def vector_pattern(v) -> EqualityPattern:
    """Coordinate-equality pattern of a vector (a one-column matrix)."""
    return EqualityPattern.from_sequence([int(x) for x in np.asarray(v).ravel()])


def distinct_rows(M: GroupMatrix) -> GroupMatrix:
    """``M`` with repeated rows removed, keeping first occurrences in order."""
    pat = equality_pattern(M)
    return GroupMatrix(M.entries[[c[0] for c in pat.classes]], M.modulus)


def sample_eqpat(pattern: EqualityPattern, modulus, rng: np.random.Generator) -> np.ndarray:
    """Uniform vector whose coordinate-equality pattern is exactly ``pattern``."""
    mod = as_modulus(modulus)
    if pattern.j > mod.N:
        raise ValueError(
            f"cannot place {pattern.j} distinct class values in Z_{mod.N}"
        )
    values = rng.choice(mod.N, size=pattern.j, replace=False).astype(np.int64)
    return values[pattern.class_of()]


def sample_class_constant(pattern: EqualityPattern, modulus, rng: np.random.Generator) -> np.ndarray:
    """Vector constant on each class, one independent uniform value per class.

    Unlike :func:`sample_eqpat`, two classes may receive the same value.
    """
    mod = as_modulus(modulus)
    values = rng.integers(0, mod.N, size=pattern.j, dtype=np.int64)
    return values[pattern.class_of()]


class FiniteDistribution:
    """A probability distribution over a finite list of hashable outcomes."""

    __slots__ = ("support", "probabilities")

    def __init__(self, support: Iterable[Hashable], probabilities):
        sup = list(support)
        p = np.asarray(probabilities, dtype=float).ravel()
        if len(sup) != p.shape[0]:
            raise ValueError("support and probabilities differ in length")
        if np.any(p < -1e-15):
            raise ValueError("negative probability")
        if sup and abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        self.support = sup
        self.probabilities = np.clip(p, 0.0, None)

    def __len__(self) -> int:
        return len(self.support)

    @classmethod
    def uniform(cls, support: Iterable[Hashable]) -> "FiniteDistribution":
        sup = list(support)
        return cls(sup, np.full(len(sup), 1.0 / len(sup)))

    @classmethod
    def point(cls, outcome: Hashable) -> "FiniteDistribution":
        return cls([outcome], [1.0])

    @classmethod
    def from_counts(cls, counts: dict) -> "FiniteDistribution":
        total = sum(counts.values())
        keys = list(counts)
        return cls(keys, [counts[k] / total for k in keys])

    def as_dict(self) -> dict:
        out: dict = {}
        for u, p in zip(self.support, self.probabilities):
            out[u] = out.get(u, 0.0) + float(p)
        return out


def min_entropy(d: FiniteDistribution) -> float:
    """Min-entropy in bits, ``-log2(max_u Pr[u])``."""
    if len(d) == 0:
        raise ValueError("min-entropy of an empty distribution")
    pmax = float(np.max(d.probabilities))
    return 0.0 if pmax >= 1.0 else -math.log2(pmax)


def statistical_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """Total-variation distance; outcomes missing from one side carry mass 0."""
    pd, qd = p.as_dict(), q.as_dict()
    keys = set(pd) | set(qd)
    return 0.5 * sum(abs(pd.get(u, 0.0) - qd.get(u, 0.0)) for u in keys)


def tv_from_uniform(probs) -> float:
    """TV distance between a probability vector over Z_N and uniform on Z_N."""
    p = np.asarray(probs, dtype=float)
    return 0.5 * float(np.abs(p - 1.0 / p.shape[0]).sum())


def lhl_epsilon(entropy_bits: float, modulus) -> float:
    """Leftover-hash-lemma distance ``sqrt(N) / 2^(H/2)`` for one Z_N symbol."""
    if entropy_bits < 0:
        raise ValueError("entropy must be nonnegative")
    N = as_modulus(modulus).N
    return math.sqrt(N) / 2.0 ** (entropy_bits / 2.0)
