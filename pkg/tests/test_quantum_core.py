from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsga.quantum_core import (
    DensityMatrix,
    Layout,
    PureState,
    bits,
    dephase,
    inner_product,
    measure_label_function,
    mix,
    mix_records,
    partial_trace,
    qft_zn,
    root_table,
    swap_test,
    swap_test_pass_probability,
    tensor,
    trace_distance,
    zn,
)

QUBIT = Layout([bits("q", 1)])
PLUS = PureState(QUBIT, [1 / math.sqrt(2), 1 / math.sqrt(2)])
MINUS = PureState(QUBIT, [1 / math.sqrt(2), -1 / math.sqrt(2)])


def random_state(layout: Layout, seed: int) -> PureState:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return PureState(layout, v, normalize=True)


def random_density(dim: int, seed: int) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(Layout([zn("r", dim)]), rho)


def test_state_validation():
    with pytest.raises(ValueError):
        PureState(QUBIT, [1, 1])
    with pytest.raises(ValueError):
        PureState(QUBIT, [1, 0, 0])
    s = PureState(QUBIT, [1, 1e-16], normalize=True)
    assert s.support().tolist() == [0]


def test_tensor_basis_kets():
    s = tensor(PureState.basis(QUBIT, [0]), PureState.basis(QUBIT, [1]))
    assert s.amplitude((0, 1)) == 1
    assert s.support().tolist() == [1]


def test_tensor_uniform():
    s = tensor(PLUS, PLUS)
    assert np.allclose(s.amplitudes, 0.5)


@settings(max_examples=50, deadline=None)
@given(seeds=st.lists(st.integers(0, 2**32), min_size=4, max_size=4))
def test_tensor_inner_product_factorizes(seeds):
    la, lb = Layout([zn("a", 3)]), Layout([bits("b", 2)])
    a, ap = random_state(la, seeds[0]), random_state(la, seeds[1])
    b, bp = random_state(lb, seeds[2]), random_state(lb, seeds[3])
    lhs = inner_product(tensor(a, b), tensor(ap, bp))
    assert abs(lhs - inner_product(a, ap) * inner_product(b, bp)) <= 1e-12


def test_inner_product_examples():
    lay = Layout([zn("g", 4)])
    s = random_state(lay, 1)
    assert inner_product(s, s) == pytest.approx(1.0, abs=1e-12)
    assert inner_product(PureState.basis(lay, [0]), PureState.basis(lay, [2])) == 0
    phased = PureState(lay, root_table(4) / 2)
    assert abs(inner_product(PureState.uniform(lay), phased)) <= 1e-12
    with pytest.raises(ValueError):
        inner_product(s, PLUS)


def test_trace_distance_examples():
    rho = DensityMatrix.from_pure(PLUS)
    assert trace_distance(rho, rho) == 0.0
    assert trace_distance(rho, DensityMatrix.from_pure(MINUS)) == pytest.approx(1.0)
    half = DensityMatrix(QUBIT, np.eye(2) / 2)
    assert trace_distance(rho, half) == pytest.approx(0.5)


def test_trace_distance_dense_cap():
    lay = Layout([zn("r", 8)])
    rho = DensityMatrix(lay, np.eye(8) / 8)
    sigma = DensityMatrix.from_pure(PureState.basis(lay, [0]))
    with pytest.raises(ValueError, match="shrink"):
        trace_distance(rho, sigma, cap=4)


@settings(max_examples=30, deadline=None)
@given(seeds=st.lists(st.integers(0, 2**32), min_size=3, max_size=3))
def test_trace_distance_metric(seeds):
    a, b, c = (random_density(5, s) for s in seeds)
    ab = trace_distance(a, b)
    assert 0.0 <= ab <= 1.0
    assert ab == pytest.approx(trace_distance(b, a), abs=1e-12)
    assert ab <= trace_distance(a, c) + trace_distance(c, b) + 1e-9


def test_measure_constant_function():
    s = random_state(Layout([bits("x", 2)]), 3)
    recs = measure_label_function(s, lambda lab: 0)
    assert len(recs) == 1 and recs[0].probability == pytest.approx(1.0)
    assert np.allclose(recs[0].collapsed.amplitudes, s.amplitudes)


def test_measure_identity_function():
    s = random_state(Layout([bits("x", 2)]), 4)
    recs = measure_label_function(s, lambda lab: lab)
    assert len(recs) == 4
    for r in recs:
        assert r.collapsed.support().size == 1


def test_measure_parity():
    lay = Layout([bits("a", 1), bits("b", 1)])
    recs = measure_label_function(PureState.uniform(lay), lambda lab: (lab[0] + lab[1]) % 2)
    assert [r.outcome for r in recs] == [0, 1]
    for r in recs:
        assert r.probability == pytest.approx(0.5)
        assert np.allclose(np.abs(r.collapsed.amplitudes[r.collapsed.support()]), 1 / math.sqrt(2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), mod=st.integers(1, 5))
def test_measurement_conserves_probability_and_dephases(seed, mod):
    lay = Layout([bits("x", 3)])
    s = random_state(lay, seed)
    keys = np.arange(8) % mod
    recs = measure_label_function(s, keys)
    assert sum(r.probability for r in recs) == pytest.approx(1.0, abs=1e-9)
    # oracle: zero the outer product wherever the keys differ
    outer = np.outer(s.amplitudes, s.amplitudes.conj())
    outer[keys[:, None] != keys[None, :]] = 0
    assert np.abs(mix_records(recs).to_dense() - outer).max() <= 1e-12
    assert np.abs(dephase(s, keys).to_dense() - outer).max() <= 1e-12


def test_mix_examples():
    rho = mix([(1.0, PLUS)])
    assert rho.purity() == pytest.approx(1.0)
    zero, one = PureState.basis(QUBIT, [0]), PureState.basis(QUBIT, [1])
    assert np.allclose(mix([(0.5, zero), (0.5, one)]).to_dense(), np.eye(2) / 2)
    assert np.abs(mix([(0.5, PLUS), (0.5, MINUS)]).to_dense() - np.eye(2) / 2).max() <= 1e-12
    with pytest.raises(ValueError):
        mix([(0.5, PLUS), (0.6, MINUS)])


@pytest.mark.parametrize("d", [2, 3, 7, 16])
def test_maximally_mixed_purity(d):
    lay = Layout([zn("r", d)])
    rho = mix([(1 / d, PureState.basis(lay, [i])) for i in range(d)])
    assert rho.purity() == pytest.approx(1 / d, abs=1e-9)
    assert rho.is_psd()


def test_density_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(QUBIT, [[0.5, 0.1], [0.2, 0.5]])
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(QUBIT, np.eye(2))


def test_qft_of_zero_and_uniform():
    lay = Layout([zn("g", 6)])
    u = qft_zn(PureState.basis(lay, [0]))
    assert np.allclose(u.amplitudes, 1 / math.sqrt(6))
    back = qft_zn(PureState.uniform(lay))
    assert np.allclose(back.amplitudes, PureState.basis(lay, [0]).amplitudes)


def test_qft_phase_convention():
    N = 5
    lay = Layout([zn("g", N)])
    out = qft_zn(PureState.basis(lay, [2]))
    expected = np.exp(2j * np.pi * 2 * np.arange(N) / N) / math.sqrt(N)
    assert np.allclose(out.amplitudes, expected)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), N=st.integers(2, 12))
def test_qft_round_trip(seed, N):
    lay = Layout([zn("g", N), bits("b", 1)])
    s = random_state(lay, seed)
    out = qft_zn(s)
    assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(qft_zn(out, inverse=True).amplitudes - s.amplitudes).max() <= 1e-12


def test_qft_rejects_bit_register():
    with pytest.raises(ValueError):
        qft_zn(PLUS)


@pytest.mark.parametrize("N", range(2, 33))
def test_fourier_sums_vanish(N):
    roots = root_table(N)
    g = np.arange(N)
    for i in range(1, N):
        assert abs(roots[(g * i) % N].sum() / N) <= 1e-12


def test_swap_test_probabilities():
    assert swap_test_pass_probability(PLUS, PLUS) == pytest.approx(1.0)
    assert swap_test_pass_probability(PLUS, MINUS) == pytest.approx(0.5)
    lay = Layout([zn("r", 3)])
    a = PureState(lay, [0.6, 0.8, 0])
    b = PureState.basis(lay, [0])
    assert swap_test_pass_probability(a, b) == pytest.approx(0.68)
    rng = np.random.default_rng(0)
    passes = sum(swap_test(a, b, rng) for _ in range(20_000))
    assert abs(passes / 20_000 - 0.68) <= 4 * math.sqrt(0.68 * 0.32 / 20_000)


def test_partial_trace_of_product():
    lay = Layout([zn("a", 3)])
    a = random_state(lay, 9)
    rho = DensityMatrix.from_pure(tensor(a, PLUS))
    red = partial_trace(rho, [0])
    assert np.abs(red.to_dense() - np.outer(a.amplitudes, a.amplitudes.conj())).max() <= 1e-12


def test_dump_formats():
    lay = Layout([bits("x", 2)])
    s = PureState.basis(lay, [2])
    assert s.dump() == "10 : 1.000000000000e+00 , 0.000000000000e+00\n"
    rho = DensityMatrix.from_pure(s)
    assert rho.dump() == "(10 | 10) : 1.000000000000e+00 , 0.000000000000e+00\n"
