"""Exact linear algebra for small quantum registers.

A :class:`Layout` is an ordered list of registers. Bit registers hold ``w``-bit
strings and Z_N registers hold symbols of Z_N. A basis label is a tuple of
integers, one per register, and basis vectors are ordered lexicographically
by label, with the first register most significant.

Pure states store a dense amplitude vector; density matrices store a sparse
CSR matrix and only densify for spectral computations.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse

PRUNE_TOL = 1e-14
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-9
EIG_CUTOFF = 1e-12
DENSE_CAP = 4096


@dataclass(frozen=True)
class Register:
    """A register: ``kind`` is ``"bits"`` (``size`` = width) or ``"zn"`` (``size`` = N)."""

    name: str
    kind: str
    size: int

    def __post_init__(self) -> None:
        if self.kind not in ("bits", "zn"):
            raise ValueError(f"register kind must be 'bits' or 'zn', got {self.kind!r}")
        if self.size < 1 or (self.kind == "zn" and self.size < 2):
            raise ValueError(f"invalid register size {self.size}")

    @property
    def dim(self) -> int:
        return 2**self.size if self.kind == "bits" else self.size

    def format(self, value: int) -> str:
        if self.kind == "bits":
            return format(value, f"0{self.size}b")
        return str(value)


def bits(name: str, width: int) -> Register:
    return Register(name, "bits", width)


def zn(name: str, N: int) -> Register:
    return Register(name, "zn", N)


@dataclass(frozen=True)
class Layout:
    registers: tuple[Register, ...]

    def __init__(self, registers: Iterable[Register]):
        object.__setattr__(self, "registers", tuple(registers))
        if not self.registers:
            raise ValueError("a layout needs at least one register")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    def index(self, label: Sequence[int]) -> int:
        if len(label) != len(self.registers):
            raise ValueError(f"label {label} does not match {len(self.registers)} registers")
        idx = 0
        for v, d in zip(label, self.dims):
            if not 0 <= int(v) < d:
                raise ValueError(f"label component {v} outside [0, {d})")
            idx = idx * d + int(v)
        return idx

    def label(self, index: int) -> tuple[int, ...]:
        out = []
        for d in reversed(self.dims):
            index, v = divmod(int(index), d)
            out.append(v)
        return tuple(reversed(out))

    def labels_array(self) -> np.ndarray:
        """``(dim, registers)`` integer array of every label in basis order."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1).T
        return grids.astype(np.int64)

    def format_label(self, label: Sequence[int]) -> str:
        return ",".join(r.format(int(v)) for r, v in zip(self.registers, label))

    def __add__(self, other: "Layout") -> "Layout":
        return Layout(self.registers + other.registers)


def _prune(vec: np.ndarray) -> np.ndarray:
    vec = np.array(vec, dtype=complex)
    vec[np.abs(vec) < PRUNE_TOL] = 0.0
    return vec


class PureState:
    """A unit vector over a layout. Amplitudes below ``PRUNE_TOL`` are zeroed."""

    __slots__ = ("layout", "amplitudes")

    def __init__(self, layout: Layout, amplitudes, normalize: bool = False):
        vec = _prune(np.asarray(amplitudes, dtype=complex).ravel())
        if vec.shape[0] != layout.dim:
            raise ValueError(f"amplitude vector has length {vec.shape[0]}, layout needs {layout.dim}")
        norm = float(np.linalg.norm(vec))
        if normalize:
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = _prune(vec / norm)
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} differs from 1")
        vec.setflags(write=False)
        self.layout = layout
        self.amplitudes = vec

    @classmethod
    def basis(cls, layout: Layout, label: Sequence[int]) -> "PureState":
        vec = np.zeros(layout.dim, dtype=complex)
        vec[layout.index(label)] = 1.0
        return cls(layout, vec)

    @classmethod
    def uniform(cls, layout: Layout) -> "PureState":
        return cls(layout, np.full(layout.dim, 1.0 / math.sqrt(layout.dim), dtype=complex))

    @classmethod
    def from_map(cls, layout: Layout, amps: dict, normalize: bool = False) -> "PureState":
        vec = np.zeros(layout.dim, dtype=complex)
        for lab, a in amps.items():
            vec[layout.index(lab)] += a
        return cls(layout, vec, normalize=normalize)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.amplitudes)

    def amplitude(self, label: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.layout.index(label)])

    def as_map(self) -> dict:
        return {self.layout.label(i): complex(self.amplitudes[i]) for i in self.support()}

    def dump(self) -> str:
        """Text form: one ``label : re , im`` line per nonzero amplitude, sorted by label."""
        lines = []
        for i in self.support():
            a = self.amplitudes[i]
            lines.append(f"{self.layout.format_label(self.layout.label(i))} : {a.real:.12e} , {a.imag:.12e}")
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"PureState(dim={self.dim}, support={len(self.support())})"


def _same_layout(a, b) -> None:
    if a.layout != b.layout:
        raise ValueError("layout mismatch")


def tensor(a: PureState, b: PureState) -> PureState:
    return PureState(a.layout + b.layout, np.kron(a.amplitudes, b.amplitudes), normalize=True)


def tensor_all(states: Sequence[PureState]) -> PureState:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def inner_product(a: PureState, b: PureState) -> complex:
    """``<a|b>``, conjugate-linear in the first argument."""
    _same_layout(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: PureState, b: PureState) -> float:
    return abs(inner_product(a, b)) ** 2


class DensityMatrix:
    """A sparse density operator over a layout.

    Construction checks Hermiticity and unit trace. Positivity costs an
    eigendecomposition and is checked on request by :meth:`is_psd`.
    """

    __slots__ = ("layout", "matrix")

    def __init__(self, layout: Layout, matrix, check: bool = True, prune: bool = True):
        mat = sparse.csr_matrix(matrix, dtype=complex)
        if mat.shape != (layout.dim, layout.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {layout.dim}")
        if prune:
            mat.data[np.abs(mat.data) < PRUNE_TOL] = 0.0
            mat.eliminate_zeros()
        mat.sort_indices()
        self.layout = layout
        self.matrix = mat
        if check:
            self._check()

    def _check(self) -> None:
        gap = abs(self.matrix - self.matrix.conj().T)
        if gap.nnz and gap.max() > HERMITIAN_TOL:
            raise ValueError(f"matrix not Hermitian (gap {gap.max():.3e})")
        tr = self.matrix.diagonal().sum()
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace {tr} differs from 1")

    @classmethod
    def from_pure(cls, s: PureState) -> "DensityMatrix":
        v = sparse.csr_matrix(s.amplitudes.reshape(-1, 1))
        return cls(s.layout, v @ v.conj().T)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.dim > cap:
            raise ValueError(f"dimension {self.dim} exceeds the dense cap {cap}; shrink k*n")
        return self.matrix.toarray()

    def entry(self, a: Sequence[int], b: Sequence[int]) -> complex:
        return complex(self.matrix[self.layout.index(a), self.layout.index(b)])

    def trace(self) -> complex:
        return complex(self.matrix.diagonal().sum())

    def purity(self) -> float:
        return float((self.matrix.multiply(self.matrix.T)).sum().real)

    def eigenvalues(self, cap: int = DENSE_CAP) -> np.ndarray:
        return np.linalg.eigvalsh(self.to_dense(cap))

    def is_psd(self, tol: float = NORM_TOL, cap: int = DENSE_CAP) -> bool:
        return bool(self.eigenvalues(cap).min() >= -tol)

    def dump(self) -> str:
        """Text form: ``(labelA | labelB) : re , im`` per nonzero entry, sorted by labels."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        fmt = self.layout.format_label
        lab = self.layout.label
        lines = [
            f"({fmt(lab(coo.row[i]))} | {fmt(lab(coo.col[i]))}) : "
            f"{coo.data[i].real:.12e} , {coo.data[i].imag:.12e}"
            for i in order
        ]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, nnz={self.matrix.nnz})"


def trace_norm_hermitian(delta, cap: int = DENSE_CAP) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix, dropping |lambda| < EIG_CUTOFF."""
    dense = delta.toarray() if sparse.issparse(delta) else np.asarray(delta)
    if dense.shape[0] > cap:
        raise ValueError(f"dimension {dense.shape[0]} exceeds the dense cap {cap}; shrink k*n")
    ev = np.linalg.eigvalsh(dense)
    ev = ev[np.abs(ev) >= EIG_CUTOFF]
    return float(np.abs(ev).sum())


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix, cap: int = DENSE_CAP) -> float:
    """``(1/2) sum |eig(rho - sigma)|``, clipped into [0, 1]."""
    _same_layout(rho, sigma)
    delta = rho.matrix - sigma.matrix
    if delta.nnz == 0:
        return 0.0
    return min(1.0, 0.5 * trace_norm_hermitian(delta, cap))


def frobenius_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    _same_layout(rho, sigma)
    delta = rho.matrix - sigma.matrix
    return float(np.sqrt((abs(delta).power(2)).sum()))


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: Hashable
    probability: float
    collapsed: PureState


def _label_keys(s: PureState, f, support: np.ndarray) -> list:
    if callable(f):
        lab = s.layout.label
        return [f(lab(i)) for i in support]
    keys = np.asarray(f)
    if keys.shape[0] != s.dim:
        raise ValueError("key array must have one entry per basis vector")
    if keys.ndim == 1:
        return keys[support].tolist()
    return [tuple(row) for row in keys[support].tolist()]


def measure_label_function(s: PureState, f: Callable | np.ndarray) -> list[MeasurementRecord]:
    """Measure the classical function ``f`` of the basis label.

    ``f`` is either a callable on label tuples or an array giving the outcome
    of every basis vector (one row per basis vector for vector outcomes).
    Records come back sorted by outcome.
    """
    support = s.support()
    keys = _label_keys(s, f, support)
    groups: dict = {}
    for idx, key in zip(support, keys):
        groups.setdefault(key, []).append(idx)
    records = []
    for key in sorted(groups):
        idx = np.asarray(groups[key])
        amps = s.amplitudes[idx]
        p = float(np.vdot(amps, amps).real)
        if p <= PRUNE_TOL:
            continue
        vec = np.zeros(s.dim, dtype=complex)
        vec[idx] = amps / math.sqrt(p)
        records.append(MeasurementRecord(key, p, PureState(s.layout, vec)))
    return records


def sample_record(records: Sequence[MeasurementRecord], rng: np.random.Generator) -> MeasurementRecord:
    p = np.array([r.probability for r in records])
    return records[int(rng.choice(len(records), p=p / p.sum()))]


def dephase(s: PureState, f: Callable | np.ndarray) -> DensityMatrix:
    """``|s><s|`` with entries zeroed wherever the labels disagree under ``f``."""
    support = s.support()
    keys = _label_keys(s, f, support)
    codes = {}
    cls = np.array([codes.setdefault(k, len(codes)) for k in keys], dtype=np.int64)
    amps = s.amplitudes[support]
    rows, cols, vals = [], [], []
    for c in range(len(codes)):
        idx = support[cls == c]
        a = amps[cls == c]
        rr, cc = np.meshgrid(idx, idx, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(np.outer(a, a.conj()).ravel())
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(s.dim, s.dim),
    )
    return DensityMatrix(s.layout, mat)


def mix(ensemble: Sequence[tuple[float, PureState | DensityMatrix]]) -> DensityMatrix:
    """``sum_i p_i |psi_i><psi_i|`` (or ``sum_i p_i rho_i``)."""
    if not ensemble:
        raise ValueError("empty ensemble")
    total = sum(p for p, _ in ensemble)
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"ensemble probabilities sum to {total}, not 1")
    layout = ensemble[0][1].layout
    acc = sparse.csr_matrix((layout.dim, layout.dim), dtype=complex)
    for p, item in ensemble:
        if item.layout != layout:
            raise ValueError("layout mismatch inside ensemble")
        if isinstance(item, PureState):
            idx = item.support()
            a = item.amplitudes[idx]
            rr, cc = np.meshgrid(idx, idx, indexing="ij")
            block = sparse.csr_matrix(
                (p * np.outer(a, a.conj()).ravel(), (rr.ravel(), cc.ravel())),
                shape=(layout.dim, layout.dim),
            )
            acc = acc + block
        else:
            acc = acc + p * item.matrix
    return DensityMatrix(layout, acc)


def mix_records(records: Sequence[MeasurementRecord]) -> DensityMatrix:
    return mix([(r.probability, r.collapsed) for r in records])


def omega(N: int) -> complex:
    return cmath.exp(2j * math.pi / N)


def root_table(N: int) -> np.ndarray:
    """``omega_N^j`` for ``j = 0..N-1``, computed exactly on the unit circle."""
    return np.exp(2j * np.pi * np.arange(N) / N)


def qft_zn(s: PureState, register: int = 0, inverse: bool = False) -> PureState:
    """QFT over Z_N on one register: ``|g> -> N^-1/2 sum_h omega^(g h) |h>``."""
    reg = s.layout.registers[register]
    if reg.kind != "zn":
        raise ValueError(f"register {reg.name!r} is not a Z_N register")
    N = reg.size
    sign = -1 if inverse else 1
    F = np.exp(sign * 2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N) / math.sqrt(N)
    dims = s.layout.dims
    arr = s.amplitudes.reshape(dims)
    arr = np.moveaxis(np.tensordot(F, arr, axes=([1], [register])), 0, register)
    return PureState(s.layout, arr.reshape(-1))


def swap_test_pass_probability(a: PureState, b: PureState) -> float:
    return 0.5 * (1.0 + fidelity(a, b))


def swap_test(a: PureState, b: PureState, rng: np.random.Generator) -> bool:
    """Sampled SWAP-test outcome; ``True`` means pass."""
    return bool(rng.random() < swap_test_pass_probability(a, b))


def partial_trace(rho: DensityMatrix, keep: Sequence[int], cap: int = DENSE_CAP) -> DensityMatrix:
    """Reduce onto the registers listed in ``keep`` (in layout order)."""
    keep = sorted(keep)
    dims = rho.layout.dims
    r = len(dims)
    drop = [i for i in range(r) if i not in keep]
    kept_dim = int(np.prod([dims[i] for i in keep]))
    if kept_dim > cap:
        raise ValueError("reduced dimension exceeds the dense cap")
    coo = rho.matrix.tocoo()
    rl = np.array(np.unravel_index(coo.row, dims))
    cl = np.array(np.unravel_index(coo.col, dims))
    same = np.all(rl[drop] == cl[drop], axis=0) if drop else np.ones(coo.nnz, bool)
    kd = [dims[i] for i in keep]
    ri = np.ravel_multi_index(rl[keep][:, same], kd)
    ci = np.ravel_multi_index(cl[keep][:, same], kd)
    mat = sparse.csr_matrix((coo.data[same], (ri, ci)), shape=(kept_dim, kept_dim))
    return DensityMatrix(Layout(rho.layout.registers[i] for i in keep), mat)

