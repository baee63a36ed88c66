import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from commdensity.density import (
    BinarizationMap,
    BudgetTooSmallError,
    DensityConfig,
    SampleFile,
    SupportOverflowError,
    TestDensity,
    bump,
    estimate_density,
    plan,
)


def test_bump_shape():
    assert integrate.quad(bump, -1, 1)[0] == pytest.approx(1.0, abs=1e-12)
    assert bump(0.0) == 1.0 and bump(1.5) == 0.0
    t = np.linspace(-1, 1, 1001)
    assert bump(t).min() >= 0 and bump(t).max() <= 1


def test_pdf_has_uniform_marginals():
    td = TestDensity(20, 0.7)
    for x in (0.5, 0.51, 0.3):
        val = integrate.quad(lambda y: td.pdf([[x]], [[y]])[0], 0, 1, points=[0.45, 0.5, 0.55])[0]
        assert val == pytest.approx(1.0, abs=1e-9)


@given(st.floats(12, 400), st.floats(0, 1))
def test_pdf_nonnegative_and_peak(m, frac):
    td = TestDensity(m, frac * (m - 1))
    g = np.linspace(0, 1, 401)[:, None]
    assert td.pdf(g, g[::-1]).min() >= -1e-12
    assert td.pdf([[0.5]], [[0.5]])[0] == pytest.approx(td.truth)


@pytest.mark.parametrize("hx,hy", [(0.01, 0.02), (0.025, 0.025), (0.04, 0.001), (0.3, 0.3)])
def test_box_probability_against_quadrature(hx, hy):
    td = TestDensity(20, 0.9)
    f = lambda y, x: td.pdf([[x]], [[y]])[0]
    ref = integrate.dblquad(f, 0.5 - hx, 0.5 + hx, 0.5 - hy, 0.5 + hy, epsabs=1e-13)[0]
    assert td.box_probability(hx, hy) == pytest.approx(ref, rel=1e-8)


def test_box_probability_two_dims():
    td = TestDensity(30, 0.5, d=2)
    rng = np.random.default_rng(0)
    x, y = td.sample(400_000, rng)
    h = np.array([0.08, 0.1])
    inside = np.all(np.abs(x - 0.5) <= h, axis=1) & np.all(np.abs(y - 0.5) <= h[::-1], axis=1)
    p = td.box_probability(h, h[::-1])
    assert abs(inside.mean() - p) <= 4 * math.sqrt(p * (1 - p) / x.shape[0])


def test_sampling_matches_box_probability():
    td = TestDensity(40, 1.0)
    x, y = td.sample(500_000, np.random.default_rng(1))
    for h in (0.005, 0.0125, 0.03):
        inside = (np.abs(x[:, 0] - 0.5) <= h) & (np.abs(y[:, 0] - 0.5) <= h)
        p = td.box_probability(h, h)
        assert abs(inside.mean() - p) <= 4 * math.sqrt(p * (1 - p) / x.shape[0])


def test_independent_uniform_at_zero_offset():
    x, y = TestDensity(20, 0.0).sample(50_000, np.random.default_rng(2))
    assert stats.kstest(x[:, 0], "uniform").pvalue > 1e-3
    assert stats.kstest(y[:, 0], "uniform").pvalue > 1e-3
    assert abs(stats.pearsonr(x[:, 0], y[:, 0])[0]) < 4 / math.sqrt(50_000)


def test_histogram_near_centre():
    td = TestDensity(20, 1.0)
    x, y = td.sample(2_000_000, np.random.default_rng(3))
    h = 0.004
    inside = (np.abs(x[:, 0] - 0.5) <= h) & (np.abs(y[:, 0] - 0.5) <= h)
    est = inside.mean() / (2 * h) ** 2
    assert est == pytest.approx(td.truth, rel=0.1)


def test_support_overflow():
    with pytest.raises(SupportOverflowError):
        TestDensity(20, 0.1, x0=0.02)


def test_binarization():
    b = BinarizationMap(np.array([0.5]), np.array([0.5]), np.array([0.1]), np.array([0.2]), 5, 2.5)
    x = np.array([[0.45], [0.7], [0.6], [0.39]])
    y = np.array([[0.3], [0.5], [0.71], [0.5]])
    xb, yb = b.binarize(x, y)
    assert xb.tolist() == [0, 1, 0, 1]
    assert yb.tolist() == [0, 0, 1, 0]


def test_plan_interactive_small():
    pl = plan(DensityConfig(k=4096))
    assert pl.m1 == pytest.approx(16.0, rel=1e-9)
    assert pl.schedule.r == 2
    assert pl.h == pytest.approx(1 / 32, rel=1e-9)
    assert pl.n == math.floor(16 * 4096 * math.log(2) / 26)


def test_plan_interactive_mid():
    pl = plan(DensityConfig(k=2 ** 16))
    assert pl.m1 == pytest.approx(2 ** (16 / 3), rel=1e-9)
    assert pl.schedule.r == 4


def test_plan_one_way():
    pl = plan(DensityConfig(k=2 ** 16, mode="oneway"))
    m1 = (2 ** 16 / 16) ** (1 / 3)
    assert pl.m1 == pytest.approx(m1, rel=1e-9)
    assert pl.schedule.alphas == pytest.approx((m1 / 10,))
    assert pl.n == math.floor((2 ** 16 - 1) / (4.4 / m1 * math.log2(m1 / 10)))
    with pytest.raises(BudgetTooSmallError):
        plan(DensityConfig(k=4096, mode="oneway"))


def test_plan_higher_order_kernel():
    pl = plan(DensityConfig(k=2 ** 33, beta=3, d=1))
    assert len(pl.terms) == 4
    assert sum(t.weight for t in pl.terms) == pytest.approx((2 / 3 - 1 / 12) ** 2)
    assert all(t.budget == 2 ** 31 for t in pl.terms)
    assert pl.m1 == pytest.approx(2 ** (31 / 7), rel=1e-9)
    assert {round(t.m2 / pl.m1, 12) for t in pl.terms} == {1.0, 0.5}


@pytest.mark.parametrize("mode", ["oneway", "interactive"])
def test_flat_density_is_unbiased(mode):
    cfg = DensityConfig(k=2 ** 15, mode=mode)
    td = TestDensity(40, 0.0)
    pl = plan(cfg, td)
    est = np.array([estimate_density(cfg, td, s, the_plan=pl).p_hat for s in range(150)])
    assert abs(est.mean() - 1.0) <= 4 * est.std(ddof=1) / math.sqrt(est.size)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([2 ** 14, 2 ** 16, 2 ** 18]), st.sampled_from(["oneway", "interactive"]),
       st.integers(0, 2 ** 31))
def test_bits_within_budget(k, mode, seed):
    cfg = DensityConfig(k=k, mode=mode)
    td = TestDensity(k ** (1 / 3), k ** (-1 / 3))
    est = estimate_density(cfg, td, seed)
    assert est.bits_used <= k


def test_estimate_is_seeded():
    cfg = DensityConfig(k=2 ** 14)
    td = TestDensity(25, 0.04)
    a, b = estimate_density(cfg, td, 7), estimate_density(cfg, td, 7)
    assert a.p_hat == b.p_hat and a.bits_used == b.bits_used


def test_sample_file(tmp_path):
    rng = np.random.default_rng(4)
    rows = rng.random((2000, 2))
    path = tmp_path / "pairs.bin"
    rows.astype("<f8").tofile(path)
    src = SampleFile(path, 1)
    x, y = src.sample(5)
    np.testing.assert_array_equal(np.hstack([x, y]), rows[:5])
    assert src.marginal_mass_x(0.1) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        src.sample(5000)


def test_config_validation():
    with pytest.raises(ValueError):
        DensityConfig(mode="both")
    assert DensityConfig(beta=2).kernel_order == 1
    assert DensityConfig(beta=3.5).kernel_order == 3
