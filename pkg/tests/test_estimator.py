import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from commdensity.estimator import (
    DegenerateScheduleError,
    build_score_table,
    estimate,
    mean_statistic_identity_check,
    score_statistic,
)
from commdensity.prob_core import make_family
from commdensity.protocol import simulate_session
from commdensity.schedules import Schedule, one_way_schedule, predicted_bounds, tetration_schedule

SCHEDULES = [(2.0,), (2.0, 2.0), (3.0, 1.5, 2.0), tuple(tetration_schedule(100).alphas)]


def test_first_round_scores():
    t = build_score_table(20, 20, one_way_schedule(20))
    g = t.rounds[0].gamma
    assert g[0, 0] == pytest.approx(0.025 / 0.525, rel=1e-14)
    assert g[0, 0] == pytest.approx(0.047619, abs=1e-6)
    assert t.normalizer_B >= 2 * 2 / (5 * 400 * 20)


def test_trivial_schedule_is_degenerate():
    t = build_score_table(20, 20, Schedule((1.0, 1.0, 1.0)))
    assert t.degenerate and t.normalizer_B == 0
    for rs in t.rounds:
        np.testing.assert_array_equal(rs.gamma, 0.0)
    u = np.zeros((3, 5), dtype=np.uint8)
    with pytest.raises(DegenerateScheduleError):
        estimate(u, np.zeros(5, np.uint8), t)


@pytest.mark.parametrize("alphas", SCHEDULES)
def test_scores_match_brute_force(alphas):
    t = build_score_table(20, 100, Schedule(alphas)) if max(alphas) < 10 else build_score_table(100, 100, Schedule(alphas))
    m1, m2 = t.m1, t.m2
    ref = oracles.scores_fd(m1, m2, alphas)
    for rs in t.rounds:
        np.testing.assert_allclose(rs.gamma, ref[rs.round_index], rtol=1e-6, atol=1e-10)
    assert t.normalizer_B == pytest.approx(oracles.normalizer_fd(m1, m2, alphas), rel=1e-6)
    assert t.normalizer_A == pytest.approx(oracles.normalizer_fd(m1, m2, alphas, "A"), rel=1e-6, abs=1e-15)


@pytest.mark.parametrize("alphas", SCHEDULES)
@pytest.mark.parametrize("delta", [-0.5, 0.3, 1.0])
def test_mean_statistic_is_linear(alphas, delta):
    m = 20 if max(alphas) < 10 else 100
    t = build_score_table(m, m, Schedule(alphas))
    assert oracles.mean_statistic(m, m, alphas, delta) == pytest.approx(delta * t.normalizer_B, rel=1e-6)


@settings(max_examples=40)
@given(st.floats(10.5, 1e4), st.floats(10.5, 1e4), st.lists(st.floats(1.0, 30.0), min_size=1, max_size=6))
def test_zero_conditional_mean(m1, m2, alphas):
    t = build_score_table(m1, m2, Schedule(alphas))
    for rs in t.rounds:
        np.testing.assert_allclose(rs.conditional_means(), 0.0, atol=1e-12)


@settings(max_examples=40)
@given(st.floats(16, 1e4), st.floats(16, 1e4))
def test_normalizer_beats_information_floor(m1, m2):
    for s in (one_way_schedule(m1), tetration_schedule(min(m1, m2))):
        if s.is_valid(m1, m2):
            t = build_score_table(m1, m2, s)
            assert t.normalizer_B >= 2 * predicted_bounds(s, m1, m2).info_odd


@pytest.mark.parametrize("m,below", [(11, True), (12, True), (13, True), (15.5, True), (16, False), (20, False)])
def test_information_floor_needs_alpha_away_from_one(m, below):
    # the floor does not vanish as alpha -> 1 while the information does
    s = one_way_schedule(m)
    ratio = build_score_table(m, m, s).normalizer_B / predicted_bounds(s, m, m).info_odd
    assert (ratio < 2) == below
    assert (ratio < 1) == (m <= 12)


def test_absorbed_branch_contributes_nothing():
    t = build_score_table(20, 20, tetration_schedule(20))
    u = np.array([[1, 1], [0, 1]], dtype=np.uint8)  # round-2 zero after an absorbed round 1
    y = np.array([0, 1], dtype=np.uint8)
    g1 = t.rounds[0].gamma
    assert score_statistic(u, y, t) == pytest.approx(g1[0, 1] + g1[1, 1])


def test_clamp_flag():
    t = build_score_table(20, 20, one_way_schedule(20))
    u = np.zeros((1, 10), dtype=np.uint8)
    y = np.zeros(10, dtype=np.uint8)
    raw = estimate(u, y, t)
    assert raw.delta_hat > 19
    assert estimate(u, y, t, clamp=True).delta_hat == 19.0
    assert raw.delta_hat == pytest.approx(raw.statistic / raw.normalizer)
    assert raw.predicted_mse == pytest.approx(2 / raw.normalizer)


@pytest.mark.parametrize("sched", [one_way_schedule(20), tetration_schedule(20)])
@pytest.mark.parametrize("delta", [-0.5, 0.0, 0.5, 1.0])
def test_unbiased_and_variance(sched, delta):
    trials, n = 400, 20000
    fam = make_family(20, 20, delta)
    t = build_score_table(20, 20, sched)
    rng = np.random.default_rng(int(1000 * (delta + 1)) + sched.r)
    dh = np.empty(trials)
    for k in range(trials):
        x, y = fam.sample(n, rng)
        dh[k] = estimate(simulate_session(x, y, sched, rng).u, y, t).delta_hat
    se = dh.std(ddof=1) / np.sqrt(trials)
    assert abs(dh.mean() - delta) <= 4 * se
    # likelihood ratio against delta = 0 is at most 1 + delta, or 1 + |delta|/(m - 1) below 0
    ratio = 1 + delta if delta >= 0 else 1 - delta / 19
    assert dh.var(ddof=1) <= ratio / (n * t.normalizer_B) * (1 + 5 / np.sqrt(trials))


def test_alice_estimator_unbiased():
    sched = tetration_schedule(20)
    fam = make_family(20, 20, 1.0)
    t = build_score_table(20, 20, sched)
    rng = np.random.default_rng(5)
    dh = []
    for _ in range(300):
        x, y = fam.sample(20000, rng)
        dh.append(estimate(simulate_session(x, y, sched, rng).u, x, t, party="A").delta_hat)
    dh = np.array(dh)
    assert abs(dh.mean() - 1.0) <= 4 * dh.std(ddof=1) / np.sqrt(dh.size)


def test_identity_check():
    ratio, se = mean_statistic_identity_check(20, 20, tetration_schedule(20), 1.0, 10_000, 200,
                                              np.random.default_rng(2))
    assert abs(ratio - 1) <= 4 * se
    with pytest.raises(ValueError):
        mean_statistic_identity_check(20, 20, tetration_schedule(20), 0.0, 10, 2, np.random.default_rng(0))
