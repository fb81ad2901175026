from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsga.group_action import ActionContext, element_state
from qsga.hash_families import HashSpec, explicit_hash, sample_hash
from qsga.qkd import (
    ProtocolConfig,
    agreement_fraction,
    analytic_abort_rate,
    detection_probability,
    run_protocol,
    swap_pass_probability,
    tamper_pass_probability,
)
from qsga.quantum_core import swap_test_pass_probability


@pytest.fixture(scope="module")
def ortho():
    return ActionContext(sample_hash(HashSpec("balanced_table", 6, 16, 1)))


def test_config_validation(ortho):
    with pytest.raises(ValueError):
        ProtocolConfig(7, ortho)
    with pytest.raises(ValueError):
        ProtocolConfig(8, ortho, adversary="none", tamper=2)
    with pytest.raises(ValueError):
        ProtocolConfig(8, ortho, adversary="tamper_first", tamper=9)
    with pytest.raises(ValueError):
        ProtocolConfig(8, ortho, substitutes="copy")
    with pytest.raises(ValueError):
        ProtocolConfig(8, ortho, force_b=2)


def test_swap_probability_matches_states():
    ctx = ActionContext(sample_hash(HashSpec("random_table", 5, 7, 3)))
    for a, b in [(0, 0), (1, 4), (6, 2)]:
        direct = swap_test_pass_probability(element_state(ctx, a), element_state(ctx, b))
        assert swap_pass_probability(ctx, a, b) == pytest.approx(direct, abs=1e-12)


def test_honest_run_never_aborts_and_decodes_b0(ortho):
    for seed in range(20):
        t = run_protocol(ProtocolConfig(64, ortho), np.random.default_rng(seed))
        assert not t.aborted and t.abort_probability == 0.0
        assert len(t.bob_key) == len(t.alice_key) == 32
        for i in t.key_positions:
            if t.bob_b[i] == 0:
                assert t.decode_pass_probability[i] == 1.0 and t.decode_outcomes[i]
            else:
                u, target = t.bob_u[i], (t.alice_g[i] + t.bob_h[i]) % 16
                expected = 1.0 if u == target else 0.5
                assert t.decode_pass_probability[i] == pytest.approx(expected)


def test_keys_avoid_checked_positions(ortho):
    t = run_protocol(ProtocolConfig(32, ortho), np.random.default_rng(0))
    assert len(t.subset) == 16
    assert set(t.key_positions).isdisjoint(t.subset)
    assert sorted(t.key_positions + t.subset) == list(range(32))


def test_constant_hash_agreement_near_half():
    ctx = ActionContext(explicit_hash([2] * 64, 16))
    fr = [agreement_fraction(run_protocol(ProtocolConfig(1024, ctx), np.random.default_rng(s)))
          for s in range(10)]
    assert abs(np.mean(fr) - 0.5) <= 4 * math.sqrt(0.25 / (512 * 10))


def test_forced_zero_bits_agree(ortho):
    t = run_protocol(ProtocolConfig(256, ortho, force_b=0), np.random.default_rng(1))
    assert agreement_fraction(t) == 1.0


def test_honest_agreement_near_three_quarters(ortho):
    fr = [agreement_fraction(run_protocol(ProtocolConfig(1024, ortho), np.random.default_rng(s)))
          for s in range(20)]
    # b = 1 agrees only when the SWAP fails; a uniform u equals g + h with probability 1/N
    expected = 0.5 + 0.5 * (0.5 - 0.5 / 16)
    assert abs(np.mean(fr) - expected) <= 4 * math.sqrt(expected * (1 - expected) / (512 * 20))


def test_full_tamper_abort_probability(ortho):
    cfg = ProtocolConfig(8, ortho, "tamper_first", 8)
    t = run_protocol(cfg, np.random.default_rng(2))
    assert t.abort_probability == pytest.approx(1 - 0.5**4)


def test_aborted_transcript_has_no_keys(ortho):
    cfg = ProtocolConfig(16, ortho, "tamper_first", 16)
    for seed in range(50):
        t = run_protocol(cfg, np.random.default_rng(seed))
        if t.aborted:
            assert t.bob_key == [] and t.alice_key == []
            with pytest.raises(ValueError):
                agreement_fraction(t)
            return
    pytest.fail("expected at least one abort")


def test_no_tamper_no_abort(ortho):
    rep = detection_probability(ProtocolConfig(8, ortho, "tamper_first", 0), 200,
                                np.random.default_rng(3))
    assert rep.aborts == 0 and rep.analytic == 0.0


def test_own_substitutes_never_abort(ortho):
    rep = detection_probability(ProtocolConfig(8, ortho, "tamper_first", 8, "own"), 200,
                                np.random.default_rng(4))
    assert rep.aborts == 0 and rep.analytic == 0.0


def test_analytic_abort_enumeration_oracle():
    n, t, q = 8, 2, 0.5
    subsets = list(itertools.combinations(range(n), n // 2))
    expected = np.mean([1 - q ** sum(i < t for i in S) for S in subsets])
    assert analytic_abort_rate(n, t, q) == pytest.approx(expected)


def test_hypergeometric_branch_matches_enumeration():
    # n = 20 exceeds the enumeration cap, so the hypergeometric law is used
    n, t, q = 20, 5, 0.5
    total = math.comb(n, n // 2)
    expected = sum(math.comb(t, j) * math.comb(n - t, n // 2 - j) / total * (1 - q**j)
                   for j in range(t + 1))
    assert analytic_abort_rate(n, t, q) == pytest.approx(expected)


def test_detection_matches_analytic(ortho):
    rep = detection_probability(ProtocolConfig(8, ortho, "tamper_first", 2), 3000,
                                np.random.default_rng(5))
    assert rep.analytic == pytest.approx(analytic_abort_rate(8, 2, 0.5))
    assert rep.within_3sigma


def test_abort_rate_monotone_in_tamper_count(ortho):
    rates = []
    for t in range(0, 9, 2):
        rep = detection_probability(ProtocolConfig(8, ortho, "tamper_first", t), 1500,
                                    np.random.default_rng(6 + t))
        rates.append((rep.rate, rep.sigma))
    for (r0, s0), (r1, s1) in zip(rates, rates[1:]):
        assert r1 >= r0 - 3 * math.hypot(s0, s1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8).map(lambda v: 2 * v), data=st.data())
def test_analytic_abort_monotone(n, data):
    q = data.draw(st.floats(0, 1))
    vals = [analytic_abort_rate(n, t, q) for t in range(n + 1)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_tamper_pass_probability_orthogonal(ortho):
    assert tamper_pass_probability(ortho, "orthogonal") == pytest.approx(0.5)
    assert tamper_pass_probability(ortho, "own") == 1.0


def test_csv_rows(ortho):
    t = run_protocol(ProtocolConfig(8, ortho), np.random.default_rng(7))
    lines = t.to_csv().splitlines()
    assert lines[0] == "i,b,b_prime,checked,swap_pass"
    assert len(lines) == 9
    checked = [row for row in t.rows() if row["checked"]]
    assert len(checked) == 4 and all(row["b"] == "" for row in checked)


def test_detection_needs_tamper_adversary(ortho):
    with pytest.raises(ValueError):
        detection_probability(ProtocolConfig(8, ortho), 10, np.random.default_rng(0))
