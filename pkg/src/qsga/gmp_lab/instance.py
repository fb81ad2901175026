"""Generalized matrix problem instances, secret distributions and presets.

Side ``b = 0`` hands out the element states labelled by ``M s``; side ``b = 1``
hands out states whose labels only share the row-equality pattern of ``M``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..finite_math import (
    EqualityPattern,
    FiniteDistribution,
    GroupMatrix,
    equality_pattern,
    matvec,
    min_entropy,
    sample_class_constant,
    sample_eqpat,
)
from ..group_action import ActionContext, element_state
from ..quantum_core import PureState

MAX_SECRET_SUPPORT = 2**16
PATTERN_SAMPLING = ("distinct", "independent")


@dataclass(frozen=True)
class SecretDistribution:
    """Distribution of the secret vector ``s``.

    Product distributions list one alphabet per coordinate: ``"zn"`` for
    uniform on Z_N and ``"binary"`` for uniform on {0, 1}. An explicit
    distribution lists its support vectors directly.
    """

    alphabets: tuple[str, ...] = ()
    explicit: FiniteDistribution | None = None

    def __post_init__(self) -> None:
        if self.explicit is None:
            if not self.alphabets:
                raise ValueError("secret distribution needs alphabets or an explicit law")
            bad = [a for a in self.alphabets if a not in ("zn", "binary")]
            if bad:
                raise ValueError(f"unknown alphabets {bad}")
        else:
            lengths = {len(tuple(v)) for v in self.explicit.support}
            if len(lengths) != 1:
                raise ValueError("explicit secret support vectors must share one length")

    @classmethod
    def uniform_zn(cls, m: int) -> "SecretDistribution":
        return cls(("zn",) * m)

    @classmethod
    def uniform_binary(cls, m: int) -> "SecretDistribution":
        return cls(("binary",) * m)

    @classmethod
    def mixed(cls, alphabets: Sequence[str]) -> "SecretDistribution":
        return cls(tuple(alphabets))

    @classmethod
    def from_explicit(cls, support: Sequence[Sequence[int]], probabilities) -> "SecretDistribution":
        return cls((), FiniteDistribution([tuple(int(a) for a in v) for v in support], probabilities))

    @classmethod
    def point(cls, s: Sequence[int]) -> "SecretDistribution":
        return cls.from_explicit([s], [1.0])

    @property
    def kind(self) -> str:
        if self.explicit is not None:
            return "explicit"
        if set(self.alphabets) == {"zn"}:
            return "uniform_zn"
        if set(self.alphabets) == {"binary"}:
            return "uniform_binary"
        return "mixed"

    @property
    def m(self) -> int:
        if self.explicit is not None:
            return len(tuple(self.explicit.support[0]))
        return len(self.alphabets)

    def alphabet_sizes(self, N: int) -> list[int]:
        return [N if a == "zn" else 2 for a in self.alphabets]

    def support_size(self, N: int) -> int:
        if self.explicit is not None:
            return len(self.explicit)
        return math.prod(self.alphabet_sizes(N))

    def is_uniform_zn(self) -> bool:
        return self.kind == "uniform_zn"

    def enumerate(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """All support vectors (rows) and their probabilities."""
        if self.explicit is not None:
            vecs = np.array([list(v) for v in self.explicit.support], dtype=np.int64) % N
            return vecs, np.asarray(self.explicit.probabilities, dtype=float)
        size = self.support_size(N)
        if size > MAX_SECRET_SUPPORT:
            raise ValueError(f"secret support {size} exceeds {MAX_SECRET_SUPPORT}; use Monte Carlo")
        sizes = self.alphabet_sizes(N)
        vecs = np.indices(sizes).reshape(len(sizes), -1).T.astype(np.int64)
        return vecs, np.full(vecs.shape[0], 1.0 / vecs.shape[0])

    def coordinate_laws(self, N: int) -> list[np.ndarray] | None:
        """Per-coordinate laws on Z_N for product distributions, else ``None``."""
        if self.explicit is not None:
            return None
        laws = []
        for a in self.alphabets:
            p = np.zeros(N)
            if a == "zn":
                p[:] = 1.0 / N
            else:
                p[0] = p[1] = 0.5
            laws.append(p)
        return laws

    def sample(self, N: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        count = 1 if size is None else size
        if self.explicit is not None:
            vecs, p = self.enumerate(N)
            out = vecs[rng.choice(vecs.shape[0], size=count, p=p)]
        else:
            highs = np.array(self.alphabet_sizes(N))
            out = rng.integers(0, highs, size=(count, len(highs)))
        return out[0] if size is None else out

    def min_entropy(self, N: int) -> float:
        if self.explicit is not None:
            return min_entropy(self.explicit)
        return float(sum(math.log2(s) for s in self.alphabet_sizes(N)))

    def to_dict(self) -> dict:
        if self.explicit is not None:
            return {
                "kind": "explicit",
                "support": [list(v) for v in self.explicit.support],
                "probabilities": [float(p) for p in self.explicit.probabilities],
            }
        return {"kind": self.kind, "alphabets": list(self.alphabets)}

    @classmethod
    def from_dict(cls, d: dict) -> "SecretDistribution":
        kind = d["kind"]
        if kind == "explicit":
            return cls.from_explicit(d["support"], d["probabilities"])
        if kind == "uniform_zn":
            return cls.uniform_zn(int(d["m"])) if "m" in d else cls(tuple(d["alphabets"]))
        if kind == "uniform_binary":
            return cls.uniform_binary(int(d["m"])) if "m" in d else cls(tuple(d["alphabets"]))
        if kind == "mixed":
            return cls.mixed(d["alphabets"])
        raise ValueError(f"unknown secret distribution kind {kind!r}")


@dataclass(frozen=True)
class GmpInstance:
    """One configuration of the matrix problem.

    ``pattern_sampling`` controls side 1: ``"distinct"`` gives different
    classes different values (exact row-equality pattern), ``"independent"``
    draws one uniform value per class with repeats allowed.
    """

    M: GroupMatrix
    secrets: SecretDistribution
    ctx: ActionContext
    b: int = 0
    pattern_sampling: str = "distinct"
    pattern: EqualityPattern = field(init=False)

    def __post_init__(self) -> None:
        if self.M.N != self.ctx.N:
            raise ValueError(f"matrix modulus {self.M.N} differs from action modulus {self.ctx.N}")
        if self.secrets.m != self.M.cols:
            raise ValueError(f"secret length {self.secrets.m} differs from matrix width {self.M.cols}")
        if self.b not in (0, 1):
            raise ValueError("side b must be 0 or 1")
        if self.pattern_sampling not in PATTERN_SAMPLING:
            raise ValueError(f"pattern_sampling must be one of {PATTERN_SAMPLING}")
        object.__setattr__(self, "pattern", equality_pattern(self.M))

    @property
    def n(self) -> int:
        return self.M.rows

    @property
    def N(self) -> int:
        return self.M.N

    @property
    def k(self) -> int:
        return self.ctx.k

    def side(self, b: int) -> "GmpInstance":
        return GmpInstance(self.M, self.secrets, self.ctx, b, self.pattern_sampling)

    def with_sampling(self, pattern_sampling: str) -> "GmpInstance":
        return GmpInstance(self.M, self.secrets, self.ctx, self.b, pattern_sampling)


def sample_labels(inst: GmpInstance, rng: np.random.Generator) -> np.ndarray:
    if inst.b == 0:
        return matvec(inst.M, inst.secrets.sample(inst.N, rng))
    if inst.pattern_sampling == "distinct":
        return sample_eqpat(inst.pattern, inst.N, rng)
    return sample_class_constant(inst.pattern, inst.N, rng)


def sample_gmp(inst: GmpInstance, rng: np.random.Generator) -> tuple[np.ndarray, tuple[PureState, ...]]:
    """Draw the label vector ``v`` and the states ``|psi_{v_1}>, ..., |psi_{v_n}>``."""
    v = sample_labels(inst, rng)
    return v, tuple(element_state(inst.ctx, int(vi)) for vi in v)


@dataclass(frozen=True)
class Preset:
    """A named example matrix with its secret distribution and building blocks."""

    name: str
    M: GroupMatrix
    secrets: SecretDistribution
    blocks: dict

    def instance(self, ctx: ActionContext, b: int = 0, pattern_sampling: str = "distinct") -> GmpInstance:
        return GmpInstance(self.M, self.secrets, ctx, b, pattern_sampling)


def ddh(N: int) -> Preset:
    """Rows ``(1,0), (0,1), (1,1)`` with secret ``(a, b)`` uniform on Z_N^2."""
    M = GroupMatrix([[1, 0], [0, 1], [1, 1]], N)
    return Preset("ddh", M, SecretDistribution.uniform_zn(2), {})


def lhs(m: int, samples: int, N: int, rng: np.random.Generator) -> Preset:
    """``samples`` uniform rows of length ``m`` and a uniform binary secret."""
    V = rng.integers(0, N, size=(samples, m))
    return Preset("lhs", GroupMatrix(V, N), SecretDistribution.uniform_binary(m), {"V": V})


def lhs_independent(m: int, N: int, rng: np.random.Generator) -> Preset:
    """Two-block layout ``[0 I; M I]`` with secret ``(s, t)``, s binary and t uniform."""
    A = rng.integers(0, N, size=(m, m))
    I = np.eye(m, dtype=np.int64)
    Z = np.zeros((m, m), dtype=np.int64)
    M = np.block([[Z, I], [A, I]])
    secrets = SecretDistribution.mixed(("binary",) * m + ("zn",) * m)
    return Preset("lhs_independent", GroupMatrix(M, N), secrets, {"M": A})


def extended_lhs(m: int, N: int, rng: np.random.Generator) -> Preset:
    """Four-block layout ``[0 I 0; 0 0 I; M I 0; M+Diag(m) 0 I]``.

    The secret is ``(s, t0, t1)`` with ``s`` binary and ``t0, t1`` uniform.
    """
    A = rng.integers(0, N, size=(m, m))
    d = rng.integers(0, N, size=m)
    I = np.eye(m, dtype=np.int64)
    Z = np.zeros((m, m), dtype=np.int64)
    M = np.block([
        [Z, I, Z],
        [Z, Z, I],
        [A, I, Z],
        [A + np.diag(d), Z, I],
    ])
    secrets = SecretDistribution.mixed(("binary",) * m + ("zn",) * (2 * m))
    return Preset("extended_lhs", GroupMatrix(M, N), secrets, {"M": A, "m": d})


def pattern_support(pattern: EqualityPattern, N: int, sampling: str) -> np.ndarray:
    """All class-value vectors of the pattern side, one row per equally likely draw."""
    j = pattern.j
    if sampling == "independent":
        if N**j > MAX_SECRET_SUPPORT:
            raise ValueError(f"N^j = {N**j} class assignments exceed the enumeration cap")
        return np.indices((N,) * j).reshape(j, -1).T.astype(np.int64)
    if j > N:
        raise ValueError(f"cannot place {j} distinct class values in Z_{N}")
    if math.perm(N, j) > MAX_SECRET_SUPPORT:
        raise ValueError("distinct class assignments exceed the enumeration cap")
    return np.array(list(itertools.permutations(range(N), j)), dtype=np.int64).reshape(-1, j)


def class_indicator(pattern: EqualityPattern) -> np.ndarray:
    """``n x j`` 0/1 matrix mapping class values to row labels."""
    P = np.zeros((pattern.n, pattern.j), dtype=np.int64)
    P[np.arange(pattern.n), pattern.class_of()] = 1
    return P
