import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commdensity.prob_core import ParameterDomainError
from commdensity.schedules import (
    InvalidScheduleError,
    Schedule,
    exact_comm_terms,
    interactive_comm_bound,
    interactive_mse_bounds,
    one_way_comm_bound,
    one_way_mse_bound,
    one_way_schedule,
    predicted_bounds,
    tetration,
    tetration_rounds,
    tetration_schedule,
    tetration_series_sum,
)


@pytest.mark.parametrize("m1,alpha", [(20, 2.0), (100, 10.0), (10.01, 1.001)])
def test_one_way(m1, alpha):
    s = one_way_schedule(m1)
    assert s.r == 1 and s.alphas[0] == pytest.approx(alpha, rel=1e-12)


def test_one_way_needs_m_above_ten():
    with pytest.raises(ParameterDomainError):
        one_way_schedule(10)


def test_tetration_values():
    assert [tetration(n) for n in range(5)] == [1, 2, 4, 16, 65536]
    assert tetration(6) == math.inf


def test_tetration_m100():
    s = tetration_schedule(100)
    e = math.e
    assert tetration_rounds(100) == 2
    assert s.alphas == pytest.approx((e, e, 10 / e, 10 / e), rel=1e-15)
    assert s.odd_product == pytest.approx(10, rel=1e-15)


def test_tetration_m20():
    assert tetration_schedule(20).alphas == pytest.approx((2.0, 2.0), rel=1e-15)


@given(st.floats(10.001, 1e300))
def test_tetration_products(m):
    s = tetration_schedule(m)
    assert s.odd_product == pytest.approx(m / 10, rel=1e-12)
    assert s.even_product == pytest.approx(m / 10, rel=1e-12)
    assert s.is_valid(m, m)
    assert s.r % 2 == 0


@given(st.floats(10.001, 1e6))
def test_tetration_round_count(m):
    assert tetration_schedule(m).r <= 6


@given(st.floats(10.001, 1e300))
def test_tetration_series_below_five(m):
    odd, even = tetration_series_sum(tetration_schedule(m))
    assert odd < 5 and even < 5


@given(st.floats(10.001, 1e8), st.floats(10.001, 1e8))
def test_tetration_bounds(m1, m2):
    m = min(m1, m2)
    b = predicted_bounds(tetration_schedule(m), m1, m2)
    assert b.comm_odd <= 6 / m1 and b.comm_even <= 6 / m2
    assert b.info_odd >= m / (50 * m1 ** 2 * m2) * (1 - 1e-12)


def test_bounds_vanish_for_trivial_factors():
    b = predicted_bounds(Schedule((1.0, 1.0)), 20, 20)
    assert b.comm_odd == 0 and b.comm_even == 0
    assert b.info_odd == pytest.approx(1 / (5 * 400 * 20))


@given(st.floats(10.5, 1e4), st.floats(10.5, 1e4))
def test_exact_comm_below_bound(m1, m2):
    for s in (one_way_schedule(m1), tetration_schedule(min(m1, m2))):
        if not s.is_valid(m1, m2):
            continue
        odd, even = exact_comm_terms(s, m1, m2)
        b = predicted_bounds(s, m1, m2)
        assert odd <= b.comm_odd * (1 + 1e-12) and even <= b.comm_even * (1 + 1e-12)


def test_invalid_schedules():
    with pytest.raises(InvalidScheduleError):
        Schedule(())
    with pytest.raises(InvalidScheduleError):
        Schedule((0.5,))
    with pytest.raises(InvalidScheduleError):
        Schedule((math.inf,))
    with pytest.raises(InvalidScheduleError):
        Schedule((3.0,)).validate(20, 20)


def test_config_round_trip():
    s = tetration_schedule(1234.5)
    assert Schedule.from_config(s.to_config()) == s
    with pytest.raises(InvalidScheduleError):
        Schedule.from_config('{"r": 3, "alphas": [2, 2]}')


def test_end_to_end_bound_formulas():
    assert one_way_mse_bound(20, 20, 20000, 0.5) == pytest.approx(0.75)
    assert one_way_comm_bound(20, 20000, 0.5) == pytest.approx(3301)
    a, b = interactive_mse_bounds(100, 1000, 1000, 0)
    assert a == pytest.approx(25 * 100 * 1000 ** 2 / (1000 * 100))
    assert b == pytest.approx(25 * 100 ** 2 * 1000 / (100 * 1000))
    assert interactive_comm_bound(100, 100, 20000, 0, 4) == pytest.approx(
        6 * 20000 * 0.02 * math.log2(math.e) + 2.5)
