"""Hash families mapping k-bit strings into Z_N.

Every random choice inside a hash function is derived from ``(seed, tag,
index)`` through a keyed counter construction, so evaluating entries lazily
one at a time gives bit-for-bit the same function as materializing the whole
table up front.

Families
--------
random_table
    Independent uniform value per domain point.
polynomial_kwise
    Random polynomial of degree ``t - 1`` over the prime field Z_N, evaluated
    at the binary value of the input. Requires ``2**k <= N``.
lossy_composed
    ``h o f`` where ``f`` maps into ``ell``-bit strings, either injectively or
    through a random ``2**(k - r)``-element subset, and ``h`` is a random table.
small_range
    ``g o f`` with ``f`` into ``r`` buckets and ``g`` a random table on buckets.
balanced_table
    A uniformly random map hitting every value of Z_N exactly ``2**k / N``
    times. Requires ``N`` to divide ``2**k``.
explicit
    A caller-supplied table.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .finite_math import is_prime

FAMILIES = (
    "random_table",
    "polynomial_kwise",
    "lossy_composed",
    "small_range",
    "balanced_table",
    "explicit",
)
MAX_ENUM_BITS = 24
MAX_AUDIT_CELLS = 2**20


def _derive_u64(seed: int, tag: bytes, index: int, counter: int) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"qsga-hash")
    h.update(struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
    h.update(tag)
    h.update(struct.pack("<QI", index, counter))
    return int.from_bytes(h.digest(), "little")


def derive_uniform(seed: int, tag: bytes, index: int, bound: int) -> int:
    """Exactly uniform integer in ``[0, bound)`` by rejection on 64-bit words."""
    limit = (2**64 // bound) * bound
    counter = 0
    while True:
        u = _derive_u64(seed, tag, index, counter)
        if u < limit:
            return u % bound
        counter += 1


def _derived_generator(seed: int, tag: bytes) -> np.random.Generator:
    return np.random.default_rng([_derive_u64(seed, tag, 0, 0), seed & 0xFFFFFFFFFFFFFFFF])


@dataclass(frozen=True)
class HashSpec:
    """Declarative description of a hash function ``{0,1}^k -> Z_N``.

    ``params`` holds family-specific settings: ``t`` for polynomial_kwise,
    ``mode``, ``r`` and ``ell`` for lossy_composed, ``r`` for small_range and
    ``table`` for explicit.
    """

    family: str
    k: int
    N: int
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        f, k, N, p = self.family, self.k, self.N, self.params
        if f not in FAMILIES:
            raise ValueError(f"unknown hash family {f!r}; expected one of {FAMILIES}")
        if k < 1:
            raise ValueError("domain_bits k must be >= 1")
        if N < 2:
            raise ValueError("range modulus N must be >= 2")
        if f == "polynomial_kwise":
            t = p.get("t")
            if not isinstance(t, int) or t < 1:
                raise ValueError("polynomial_kwise needs an integer t >= 1")
            if not is_prime(N):
                raise ValueError(f"polynomial_kwise needs a prime modulus, got N={N}")
            if 2**k > N:
                raise ValueError(
                    f"polynomial_kwise needs 2^k <= N for an injective embedding (k={k}, N={N})"
                )
        elif f == "lossy_composed":
            mode, r = p.get("mode"), p.get("r")
            ell = p.get("ell", k)
            if mode not in ("injective", "lossy"):
                raise ValueError("lossy_composed mode must be 'injective' or 'lossy'")
            if not isinstance(r, int) or not 0 <= r < k:
                raise ValueError(f"lossy_composed needs 0 <= r < k, got r={r}, k={k}")
            if not isinstance(ell, int) or not k <= ell <= 62:
                raise ValueError(f"lossy_composed needs k <= ell <= 62, got ell={ell}")
        elif f == "small_range":
            r = p.get("r")
            if not isinstance(r, int) or not 1 <= r <= 2**k:
                raise ValueError(f"small_range needs 1 <= r <= 2^k, got r={r}")
        elif f == "balanced_table":
            if (2**k) % N != 0:
                raise ValueError(f"balanced_table needs N | 2^k (k={k}, N={N})")
        elif f == "explicit":
            table = p.get("table")
            if table is None or len(table) != 2**k:
                raise ValueError(f"explicit family needs a table of length 2^k = {2**k}")
            if any(not 0 <= int(v) < N for v in table):
                raise ValueError("explicit table values must lie in [0, N)")

    def with_seed(self, seed: int) -> "HashSpec":
        return HashSpec(self.family, self.k, self.N, int(seed), dict(self.params))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "N": self.N,
            "seed": self.seed,
            "params": {key: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                       for key, v in sorted(self.params.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HashSpec":
        params = dict(d.get("params", {}))
        if "table" in params:
            params["table"] = [int(v) for v in params["table"]]
        return cls(d["family"], int(d["k"]), int(d["N"]), d.get("seed"), params)


class HashFunction:
    """An evaluated hash function. Entries are memoized on first use."""

    def __init__(self, spec: HashSpec):
        if spec.seed is None:
            raise ValueError("HashFunction needs a seeded spec; use sample_hash")
        self.spec = spec
        self._memo: dict[int, int] = {}
        self._table: np.ndarray | None = None
        self.coefficients: np.ndarray | None = None
        self.inner: np.ndarray | None = None
        self.buckets: np.ndarray | None = None
        self._setup()

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def family(self) -> str:
        return self.spec.family

    def _setup(self) -> None:
        spec, seed = self.spec, int(self.spec.seed)
        f, k, N = spec.family, spec.k, spec.N
        if f == "polynomial_kwise":
            t = spec.params["t"]
            self.coefficients = np.array(
                [derive_uniform(seed, b"poly", j, N) for j in range(t)], dtype=np.int64
            )
        elif f == "lossy_composed":
            self.inner = self._build_inner(seed)
        elif f == "balanced_table":
            gen = _derived_generator(seed, b"balanced")
            base = np.repeat(np.arange(N, dtype=np.int64), 2**k // N)
            self._table = gen.permutation(base)
        elif f == "explicit":
            self._table = np.asarray(spec.params["table"], dtype=np.int64)
        if self._table is not None:
            self._table.setflags(write=False)

    def _build_inner(self, seed: int) -> np.ndarray:
        k = self.spec.k
        p = self.spec.params
        ell = p.get("ell", k)
        gen = _derived_generator(seed, b"inner")
        if p["mode"] == "injective":
            pre = np.arange(2**k, dtype=np.int64)
        else:
            image = gen.choice(2**k, size=2 ** (k - p["r"]), replace=False)
            pre = image[gen.integers(0, image.shape[0], size=2**k)]
        # random injection {0,1}^k -> {0,1}^ell applied on top
        if ell == k:
            embed = gen.permutation(2**k)
        else:
            embed = np.unique(gen.integers(0, 2**ell, size=2**k + 64))
            while embed.shape[0] < 2**k:
                embed = np.unique(np.concatenate([embed, gen.integers(0, 2**ell, size=2**k)]))
            embed = gen.permutation(embed)[: 2**k]
        inner = np.asarray(embed, dtype=np.int64)[pre]
        inner.setflags(write=False)
        return inner

    def _entry(self, x: int) -> int:
        spec, seed = self.spec, int(self.spec.seed)
        f, N = spec.family, spec.N
        if self._table is not None:
            return int(self._table[x])
        if f == "random_table":
            return derive_uniform(seed, b"table", x, N)
        if f == "polynomial_kwise":
            acc = 0
            for c in self.coefficients[::-1]:
                acc = (acc * x + int(c)) % N
            return acc
        if f == "lossy_composed":
            return derive_uniform(seed, b"outer", int(self.inner[x]), N)
        if f == "small_range":
            r = spec.params["r"]
            bucket = derive_uniform(seed, b"bucket", x, r)
            return derive_uniform(seed, b"range", bucket, N)
        raise AssertionError(f)

    def _check(self, x) -> int:
        if isinstance(x, str):
            if len(x) != self.k or any(c not in "01" for c in x):
                raise ValueError(f"expected a {self.k}-bit string, got {x!r}")
            return int(x, 2)
        xi = int(x)
        if not 0 <= xi < 2**self.k:
            raise ValueError(f"input {x} is not a {self.k}-bit value")
        return xi

    def eval(self, x) -> int:
        """Evaluate at a k-bit input given as a bit string or an integer."""
        xi = self._check(x)
        if self._table is not None:
            return int(self._table[xi])
        val = self._memo.get(xi)
        if val is None:
            val = self._entry(xi)
            self._memo[xi] = val
        return val

    __call__ = eval

    def bucket(self, x) -> int:
        """Bucket ``f(x)`` of a small_range function."""
        if self.family != "small_range":
            raise ValueError("bucket() only applies to small_range")
        return derive_uniform(int(self.spec.seed), b"bucket", self._check(x), self.spec.params["r"])

    def materialize(self) -> np.ndarray:
        """Full table of values over the domain in input order (read-only)."""
        if self._table is None:
            if self.k > MAX_ENUM_BITS:
                raise ValueError(f"domain 2^{self.k} too large to materialize")
            if self.family == "polynomial_kwise":
                xs = np.arange(2**self.k, dtype=np.int64)
                acc = np.zeros_like(xs)
                for c in self.coefficients[::-1]:
                    acc = (acc * xs + int(c)) % self.N
                table = acc
            else:
                table = np.array([self.eval(x) for x in range(2**self.k)], dtype=np.int64)
            table.setflags(write=False)
            self._table = table
        return self._table

    @property
    def table(self) -> np.ndarray:
        return self.materialize()

    def dump(self) -> str:
        """Audit text: one ``x_hex -> value`` line per domain point, sorted by x."""
        width = max(1, (self.k + 3) // 4)
        tab = self.materialize()
        return "\n".join(f"{x:0{width}x} -> {int(v)}" for x, v in enumerate(tab)) + "\n"

    def __repr__(self) -> str:
        return f"HashFunction({self.spec!r})"


def sample_hash(spec: HashSpec, rng: np.random.Generator | None = None) -> HashFunction:
    """Draw a hash function. A spec without a seed takes a 64-bit seed from ``rng``."""
    if spec.seed is None:
        if rng is None:
            raise ValueError("an unseeded spec needs an rng")
        spec = spec.with_seed(int(rng.integers(0, 2**63)))
    return HashFunction(spec)


def explicit_hash(table: Sequence[int], N: int) -> HashFunction:
    """Wrap a fixed table as a hash function."""
    table = [int(v) for v in table]
    k = int(math.log2(len(table)))
    if 2**k != len(table):
        raise ValueError("table length must be a power of two")
    return HashFunction(HashSpec("explicit", k, N, 0, {"table": table}))


@dataclass(frozen=True)
class ImageReport:
    """Exact image size of a hash function, plus mode checks for lossy keys.

    ``mode``, ``r`` and ``bound_ok`` are only meaningful for lossy_composed;
    ``inner_image_size`` is the image of the inner map ``f`` there.
    """

    family: str
    k: int
    image_size: int
    mode: str | None = None
    r: int | None = None
    inner_image_size: int | None = None
    bound_ok: bool | None = None
    constraints: dict | None = None

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.__dataclass_fields__}


def lossy_constraint_status(k: int, r: int, n: int, N: int) -> dict:
    """Which of the lossy construction's parameter constraints hold."""
    logN = math.log2(N)
    return {
        "k_ge_8logN": bool(k >= 8 * logN),
        "2n(k-r)_le_logN/4": bool(2 * n * (k - r) <= logN / 4),
    }


def image_report(h: HashFunction, n: int = 1) -> ImageReport:
    if h.k > MAX_ENUM_BITS:
        raise ValueError(f"domain 2^{h.k} too large to enumerate")
    size = int(np.unique(h.materialize()).shape[0])
    if h.family != "lossy_composed":
        return ImageReport(h.family, h.k, size)
    p = h.spec.params
    inner = int(np.unique(h.inner).shape[0])
    if p["mode"] == "injective":
        ok = inner == 2**h.k
    else:
        ok = inner <= 2 ** (h.k - p["r"])
    return ImageReport(
        h.family, h.k, size, p["mode"], p["r"], inner, bool(ok),
        lossy_constraint_status(h.k, p["r"], n, h.N),
    )


@dataclass(frozen=True)
class KwiseAuditReport:
    t: int
    points: tuple[int, ...]
    draws: int
    cells: int
    chi2: float
    p_value: float

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.__dataclass_fields__}


def kwise_audit(spec: HashSpec, t: int, points: Sequence[int], draws: int,
                rng: np.random.Generator) -> KwiseAuditReport:
    """Chi-square test of the joint law of ``(H(x_1),...,H(x_t))`` against uniform."""
    pts = tuple(int(p) for p in points)
    if len(pts) != t or len(set(pts)) != t:
        raise ValueError("need exactly t distinct domain points")
    if any(not 0 <= p < 2**spec.k for p in pts):
        raise ValueError("audit points must be k-bit values")
    cells = spec.N**t
    if cells > MAX_AUDIT_CELLS:
        raise ValueError(
            f"N^t = {cells} cells exceeds {MAX_AUDIT_CELLS}; lower t or N"
        )
    base = spec.with_seed(0) if spec.seed is None else spec
    seeds = rng.integers(0, 2**63, size=draws)
    counts = np.zeros(cells, dtype=np.int64)
    weights = spec.N ** np.arange(t - 1, -1, -1, dtype=np.int64)
    for s in seeds:
        h = HashFunction(base.with_seed(int(s)))
        vals = np.array([h.eval(p) for p in pts], dtype=np.int64)
        counts[int(vals @ weights)] += 1
    chi2, pval = stats.chisquare(counts)
    return KwiseAuditReport(t, pts, draws, cells, float(chi2), float(pval))


def small_range_tv(k: int, N: int, r: int) -> float:
    """Exact TV distance between SR_r and a uniformly random table, k-bit domain.

    Functions are compared through the law of their full value tables. The
    SR_r law is obtained by brute force over all ``r^(2^k)`` bucket maps and
    ``N^r`` range maps, so this is meant for tiny parameters
    (``r^(2^k) * N^r <= 2^20``).
    """
    D = 2**k
    work = r**D * N**r
    if work > 2**20:
        raise ValueError(f"enumeration size {work} too large for exact SR_r distance")
    f_maps = np.array(np.unravel_index(np.arange(r**D), (r,) * D)).T
    g_maps = np.array(np.unravel_index(np.arange(N**r), (N,) * r)).T
    weights = N ** np.arange(D - 1, -1, -1, dtype=np.int64)
    tables = g_maps[:, f_maps]  # (N^r, r^D, D)
    codes = (tables.reshape(-1, D) @ weights).astype(np.int64)
    sr = np.bincount(codes, minlength=N**D) / codes.shape[0]
    return 0.5 * float(np.abs(sr - 1.0 / N**D).sum())


def small_range_ell(q: int) -> float:
    """Reference constant ``pi^2 (2q)^3 / 3`` for q-query distinguishers."""
    return math.pi**2 * (2 * q) ** 3 / 3.0


def small_range_query_bound(q: int, r: int) -> float:
    """Distinguishing bound ``ell(q) / r`` between SR_r and a random function."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return small_range_ell(q) / r
