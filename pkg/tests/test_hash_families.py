from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qsga.hash_families import (
    HashFunction,
    HashSpec,
    explicit_hash,
    image_report,
    kwise_audit,
    sample_hash,
    small_range_ell,
    small_range_tv,
)


def poly_eval(coeffs, x, N):
    return sum(int(c) * pow(x, j, N) for j, c in enumerate(coeffs)) % N


def test_spec_validation():
    with pytest.raises(ValueError, match="2\\^k <= N"):
        HashSpec("polynomial_kwise", 4, 7, 0, {"t": 2})
    with pytest.raises(ValueError, match="prime"):
        HashSpec("polynomial_kwise", 2, 8, 0, {"t": 2})
    with pytest.raises(ValueError):
        HashSpec("lossy_composed", 4, 7, 0, {"mode": "lossy", "r": 4})
    with pytest.raises(ValueError):
        HashSpec("small_range", 2, 7, 0, {"r": 5})
    with pytest.raises(ValueError):
        HashSpec("small_range", 2, 7, 0, {"r": 0})
    with pytest.raises(ValueError):
        HashSpec("nope", 2, 7, 0)


def test_spec_round_trip():
    spec = HashSpec("lossy_composed", 6, 11, 5, {"mode": "lossy", "r": 2, "ell": 8})
    assert HashSpec.from_dict(spec.to_dict()) == spec


def test_unseeded_spec_draws_seed_from_rng():
    spec = HashSpec("random_table", 3, 5)
    a = sample_hash(spec, np.random.default_rng(4))
    b = sample_hash(spec, np.random.default_rng(4))
    assert a.materialize().tolist() == b.materialize().tolist()
    with pytest.raises(ValueError):
        sample_hash(spec)


FAMILY_SPECS = [
    HashSpec("random_table", 5, 7, 11),
    HashSpec("polynomial_kwise", 3, 11, 11, {"t": 3}),
    HashSpec("lossy_composed", 5, 7, 11, {"mode": "lossy", "r": 2, "ell": 7}),
    HashSpec("small_range", 5, 7, 11, {"r": 3}),
    HashSpec("balanced_table", 4, 4, 11),
]


@pytest.mark.parametrize("spec", FAMILY_SPECS, ids=lambda s: s.family)
def test_lazy_and_eager_agree(spec):
    lazy = HashFunction(spec)
    values = [lazy.eval(x) for x in reversed(range(2**spec.k))][::-1]
    eager = HashFunction(spec).materialize().tolist()
    assert values == eager
    assert [lazy.eval(x) for x in range(2**spec.k)] == eager


@pytest.mark.parametrize("spec", FAMILY_SPECS, ids=lambda s: s.family)
def test_eval_deterministic_and_width_checked(spec):
    h = sample_hash(spec)
    x = "1" * spec.k
    assert h.eval(x) == h.eval(x) == h.eval(2**spec.k - 1)
    with pytest.raises(ValueError):
        h.eval("1" * (spec.k + 1))
    with pytest.raises(ValueError):
        h.eval(2**spec.k)


def test_polynomial_matches_coefficients():
    h = sample_hash(HashSpec("polynomial_kwise", 3, 257, 3, {"t": 4}))
    for x in range(8):
        assert h.eval(x) == poly_eval(h.coefficients, x, 257)


@pytest.mark.parametrize("N,t", [(5, 2), (5, 3), (7, 2)])
def test_polynomial_family_exactly_t_wise_uniform(N, t):
    # every coefficient vector once: each joint value must occur N^(t-s) times
    k = 2
    for s in range(1, t + 1):
        for pts in itertools.combinations(range(2**k), s):
            counts: dict = {}
            for coeffs in itertools.product(range(N), repeat=t):
                key = tuple(poly_eval(coeffs, x, N) for x in pts)
                counts[key] = counts.get(key, 0) + 1
            assert len(counts) == N**s
            assert set(counts.values()) == {N ** (t - s)}


def test_polynomial_joint_law_chi_square():
    rng = np.random.default_rng(5)
    rep = kwise_audit(HashSpec("polynomial_kwise", 2, 5, None, {"t": 2}), 2, [1, 3], 100_000, rng)
    assert rep.p_value > 0.001


def test_kwise_audit_detects_affine_dependence():
    # degree-1 polynomials: H(2) = 2 H(1) - H(0), so the 3-point joint law is far from uniform
    rng = np.random.default_rng(6)
    rep = kwise_audit(HashSpec("polynomial_kwise", 2, 5, None, {"t": 2}), 3, [0, 1, 2], 5000, rng)
    assert rep.p_value < 1e-6


def test_kwise_audit_random_table_uniform():
    rng = np.random.default_rng(7)
    rep = kwise_audit(HashSpec("random_table", 3, 5, None), 3, [0, 5, 6], 20_000, rng)
    assert rep.p_value > 0.001


def test_kwise_audit_rejects_large_cell_space():
    with pytest.raises(ValueError, match="lower t or N"):
        kwise_audit(HashSpec("random_table", 6, 257, None), 3, [0, 1, 2], 10,
                    np.random.default_rng(0))
    with pytest.raises(ValueError):
        kwise_audit(HashSpec("random_table", 3, 5, None), 2, [1, 1], 10, np.random.default_rng(0))


def test_random_table_fixed_point_uniform_over_tables():
    rng = np.random.default_rng(8)
    vals = [sample_hash(HashSpec("random_table", 4, 7), rng).eval(9) for _ in range(7000)]
    assert stats.chisquare(np.bincount(vals, minlength=7)).pvalue > 0.001


def test_small_range_single_bucket_is_constant():
    h = sample_hash(HashSpec("small_range", 6, 97, 2, {"r": 1}))
    assert image_report(h).image_size == 1


@settings(max_examples=40, deadline=None)
@given(r=st.integers(1, 16), seed=st.integers(0, 2**63 - 1))
def test_small_range_image_at_most_r(r, seed):
    h = sample_hash(HashSpec("small_range", 8, 101, seed, {"r": r}))
    assert image_report(h).image_size <= r


def test_lossy_modes():
    lossy = image_report(sample_hash(HashSpec("lossy_composed", 8, 1009, 1,
                                              {"mode": "lossy", "r": 5})))
    assert lossy.inner_image_size <= 8 and lossy.image_size <= 8 and lossy.bound_ok
    inj = image_report(sample_hash(HashSpec("lossy_composed", 6, 2**20, 1,
                                            {"mode": "injective", "r": 2, "ell": 10})))
    assert inj.inner_image_size == 64 and inj.bound_ok


def test_lossy_is_outer_after_inner():
    h = sample_hash(HashSpec("lossy_composed", 5, 13, 9, {"mode": "lossy", "r": 2, "ell": 7}))
    # equal inner images must give equal outputs
    for x, y in itertools.combinations(range(32), 2):
        if h.inner[x] == h.inner[y]:
            assert h.eval(x) == h.eval(y)


def test_balanced_table_exact_preimages():
    h = sample_hash(HashSpec("balanced_table", 6, 8, 3))
    assert np.bincount(h.materialize(), minlength=8).tolist() == [8] * 8


def test_explicit_and_dump():
    h = explicit_hash([3, 0, 4, 4], 5)
    assert h.k == 2 and h.eval("10") == 4
    assert h.dump() == "0 -> 3\n1 -> 0\n2 -> 4\n3 -> 4\n"
    assert image_report(h).image_size == 3
    with pytest.raises(ValueError):
        explicit_hash([0, 1, 2], 5)


def test_small_range_tv_oracle():
    # one bucket on a 1-bit domain: only constant tables, mass 1/N each over N of N^2 tables
    N = 3
    expected = 0.5 * (N * abs(1 / N - 1 / N**2) + (N**2 - N) / N**2)
    assert small_range_tv(1, N, 1) == pytest.approx(expected)
    assert small_range_ell(1) == pytest.approx(np.pi**2 * 8 / 3)
