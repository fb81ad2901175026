from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from qsga.group_action import ActionContext, element_amplitudes
from qsga.hash_families import HashSpec, explicit_hash, sample_hash
from qsga.money import (
    Banknote,
    acceptance_probability,
    counterfeit_experiment,
    gen_action_route,
    gen_hash_route,
    genuine_note,
    keep_and_start_analytic,
    measure_and_copy_analytic,
    preimage_counts,
    verify,
)
from qsga.quantum_core import PureState, fidelity


def random_ctx(k: int, N: int, seed: int) -> ActionContext:
    return ActionContext(sample_hash(HashSpec("random_table", k, N, seed)))


def test_constant_hash_serial_and_note():
    ctx = ActionContext(explicit_hash([3] * 8, 5))
    rng = np.random.default_rng(0)
    for _ in range(10):
        note = gen_hash_route(ctx, rng)
        assert note.serial == 3
        assert fidelity(note.note, ctx.start_state) == pytest.approx(1.0)


def test_serial_distribution_matches_preimage_masses():
    ctx = random_ctx(6, 8, 1)
    rng = np.random.default_rng(1)
    serials = [gen_hash_route(ctx, rng).serial for _ in range(10_000)]
    observed = np.bincount(serials, minlength=8)
    expected = preimage_counts(ctx) / 64 * 10_000
    keep = expected > 0
    assert np.all(observed[~keep] == 0)
    assert stats.chisquare(observed[keep], expected[keep]).pvalue > 0.001


def test_note_support_inside_preimage():
    ctx = random_ctx(5, 7, 2)
    rng = np.random.default_rng(2)
    for _ in range(30):
        for note in (gen_hash_route(ctx, rng), gen_action_route(ctx, rng)):
            h = note.hash_value(7)
            assert np.all(ctx.table[note.note.support()] == h)


def test_action_route_note_is_fourier_sum_of_element_states():
    ctx = random_ctx(4, 6, 3)
    rng = np.random.default_rng(3)
    for _ in range(10):
        note = gen_action_route(ctx, rng)
        sigma = note.serial
        vec = sum(np.exp(2j * np.pi * g * sigma / 6) * element_amplitudes(ctx, g) for g in range(6))
        oracle = PureState(ctx.layout, vec, normalize=True)
        assert fidelity(note.note, oracle) == pytest.approx(1.0, abs=1e-9)
        assert fidelity(note.note, genuine_note(ctx, -sigma)) == pytest.approx(1.0, abs=1e-9)


def test_injective_hash_gives_basis_kets():
    ctx = ActionContext(explicit_hash([5, 1, 7, 2], 8))
    rng = np.random.default_rng(4)
    for _ in range(10):
        assert gen_hash_route(ctx, rng).note.support().size == 1
        assert gen_action_route(ctx, rng).note.support().size == 1


def test_genuine_note_accepted():
    ctx = random_ctx(6, 8, 5)
    rng = np.random.default_rng(5)
    for _ in range(20):
        for note in (gen_hash_route(ctx, rng), gen_action_route(ctx, rng)):
            assert acceptance_probability(ctx, note.serial, note.note, note.route) >= 1 - 1e-9
            assert verify(ctx, note.serial, note.note, rng, note.route).accept


def test_classical_ket_passes_test_with_one_over_p():
    ctx = random_ctx(6, 4, 6)
    counts = preimage_counts(ctx)
    x0 = 11
    h = int(ctx.table[x0])
    ket = PureState.basis(ctx.layout, (x0,))
    assert acceptance_probability(ctx, h, ket) == pytest.approx(1 / counts[h])
    rng = np.random.default_rng(6)
    verdicts = [verify(ctx, h, ket, rng) for _ in range(4000)]
    assert all(v.serial_match for v in verdicts)
    rate = np.mean([v.test_pass for v in verdicts])
    p = 1 / counts[h]
    assert abs(rate - p) <= 4 * math.sqrt(p * (1 - p) / 4000)


def test_wrong_serial_rejected():
    ctx = random_ctx(5, 8, 7)
    rng = np.random.default_rng(7)
    note = gen_hash_route(ctx, rng)
    wrong = (note.serial + 1) % 8
    for _ in range(50):
        v = verify(ctx, wrong, note.note, rng)
        assert not v.accept and not v.serial_match
    assert acceptance_probability(ctx, wrong, note.note) == 0.0


def test_projector_fixes_genuine_note_only():
    ctx = random_ctx(5, 4, 8)
    for h in range(4):
        note = genuine_note(ctx, h)
        proj = np.outer(note.amplitudes, note.amplitudes.conj())
        assert np.allclose(proj @ note.amplitudes, note.amplitudes)
        for other in range(4):
            if other != h:
                assert np.allclose(proj @ genuine_note(ctx, other).amplitudes, 0)


def test_missing_serial_value():
    ctx = ActionContext(explicit_hash([0, 0, 1, 1], 4))
    with pytest.raises(ValueError):
        genuine_note(ctx, 3)
    assert acceptance_probability(ctx, 3, ctx.start_state) == 0.0


@pytest.mark.parametrize("route", ["hash", "action"])
def test_dump_round_trip(route):
    ctx = random_ctx(4, 4, 9)
    rng = np.random.default_rng(9)
    note = gen_hash_route(ctx, rng) if route == "hash" else gen_action_route(ctx, rng)
    back = Banknote.from_dump(note.dump(), ctx.layout)
    assert back.serial == note.serial and back.route == note.route
    assert np.abs(back.note.amplitudes - note.note.amplitudes).max() <= 1e-11


def test_measure_and_copy_analytic_is_expected_inverse_square():
    ctx = random_ctx(10, 8, 10)
    counts = preimage_counts(ctx)
    p = counts / 1024
    expected = float(sum(p[h] / counts[h] ** 2 for h in range(8) if counts[h]))
    assert measure_and_copy_analytic(ctx) == pytest.approx(expected)


def test_injective_hash_counterfeits_perfectly():
    ctx = ActionContext(explicit_hash([5, 1, 7, 2], 8))
    rep = counterfeit_experiment(ctx, "measure_and_copy", 200, np.random.default_rng(11))
    assert rep.analytic == pytest.approx(1.0) and rep.rate == 1.0


@pytest.mark.parametrize("strategy", ["measure_and_copy", "keep_and_start"])
def test_counterfeit_rate_matches_analytic(strategy):
    ctx = random_ctx(6, 4, 12)
    rep = counterfeit_experiment(ctx, strategy, 3000, np.random.default_rng(12))
    assert rep.within_3sigma
    if strategy == "keep_and_start":
        assert rep.analytic == pytest.approx(keep_and_start_analytic(ctx))
    with pytest.raises(ValueError):
        counterfeit_experiment(ctx, "clone", 1, np.random.default_rng(0))
