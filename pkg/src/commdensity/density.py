"""Pointwise joint-density estimation at ``(x0, y0)`` over a rate-limited link.

Each party binarizes its samples by membership in a box around its
evaluation point, the two run the Bernoulli protocol on the indicator bits,
and Bob turns his offset estimate into a box-probability estimate.  With the
order-1 kernel this is the rectangular kernel estimator; higher orders
combine several boxes with signed weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .estimator import EstimateReport, build_score_table, estimate
from .kernels import KernelSpec, kernel_coeffs
from .prob_core import family_joint
from .protocol import SharedRandomness, run_session, simulate_session
from .schedules import Schedule, one_way_schedule, tetration_schedule


class BudgetTooSmallError(ValueError):
    """The communication budget cannot support ``m > 10``."""


class SupportOverflowError(ValueError):
    pass


def bump(t) -> np.ndarray:
    """Raised cosine ``(1 + cos(pi t)) / 2`` on ``[-1, 1]``; unit mass, peak 1."""
    t = np.asarray(t, dtype=np.float64)
    return np.where(np.abs(t) <= 1.0, 0.5 * (1.0 + np.cos(np.pi * t)), 0.0)


def _bump_mass(s) -> np.ndarray:
    """``int_{-s}^{s} bump``, for ``s >= 0``."""
    s = np.minimum(np.asarray(s, dtype=np.float64), 1.0)
    return s + np.sin(np.pi * s) / np.pi


def _sample_bump(size, rng: np.random.Generator) -> np.ndarray:
    size = int(np.prod(size))
    out = np.empty(size)
    filled = 0
    while filled < size:
        t = rng.uniform(-1.0, 1.0, 2 * (size - filled) + 16)
        t = t[rng.random(t.size) < bump(t)]
        take = min(t.size, size - filled)
        out[filled:filled + take] = t[:take]
        filled += take
    return out


def _center(point, d: int) -> np.ndarray:
    if point is None:
        return np.full(d, 0.5)
    point = np.broadcast_to(np.asarray(point, dtype=np.float64), (d,))
    return point.copy()


def _uniform_box_mass(center, half) -> float:
    lo = np.clip(center - half, 0.0, 1.0)
    hi = np.clip(center + half, 0.0, 1.0)
    return float(np.prod(hi - lo))


@dataclass
class TestDensity:
    """Smooth density on ``[0,1]^{2d}`` with uniform marginals and a bump of height ``delta`` at ``(x0, y0)``.

    A latent pair of near/far indicators with the biased Bernoulli law
    ``(m, m, delta)`` is drawn first; near samples follow the scaled bump,
    far samples the complementary density.
    """

    __test__ = False  # not a pytest class

    m: float
    delta: float
    d: int = 1
    x0: np.ndarray = None
    y0: np.ndarray = None

    def __post_init__(self):
        self.x0 = _center(self.x0, self.d)
        self.y0 = _center(self.y0, self.d)
        radius = self.m ** (-1.0 / self.d)
        room = min(self.x0.min(), (1 - self.x0).min(), self.y0.min(), (1 - self.y0).min())
        if radius > room:
            raise SupportOverflowError(
                f"bump radius {radius:.4g} does not fit in the unit cube (m={self.m})")
        if not -1.0 <= self.delta <= self.m - 1.0:
            raise ValueError(f"delta={self.delta} outside [-1, m-1]")

    @property
    def truth(self) -> float:
        # the bump profile equals 1 at the centre, so both offsets are 1 there
        return 1.0 + self.delta

    @property
    def latent_matrix(self) -> np.ndarray:
        return family_joint(self.m, self.m).evaluate(self.delta)

    def _profile(self, z, center) -> np.ndarray:
        s = self.m ** (1.0 / self.d) * (np.atleast_2d(z) - center)
        return np.prod(bump(s), axis=1)

    def pdf(self, x, y) -> np.ndarray:
        m = self.m
        ax = -1.0 / (m - 1) + m / (m - 1) * self._profile(x, self.x0)
        ay = -1.0 / (m - 1) + m / (m - 1) * self._profile(y, self.y0)
        return 1.0 + self.delta * ax * ay

    def _box_offset(self, center, half) -> float:
        half = np.broadcast_to(np.asarray(half, dtype=np.float64), (self.d,))
        scale = self.m ** (-1.0 / self.d)
        bump_part = np.prod(scale * _bump_mass(half / scale))
        vol = _uniform_box_mass(center, half)
        return -vol / (self.m - 1) + self.m / (self.m - 1) * bump_part

    def box_probability(self, half_x, half_y) -> float:
        """Exact ``P(X in box_x, Y in box_y)`` for boxes centred at ``(x0, y0)``."""
        vx = _uniform_box_mass(self.x0, half_x)
        vy = _uniform_box_mass(self.y0, half_y)
        return vx * vy + self.delta * self._box_offset(self.x0, half_x) * self._box_offset(self.y0, half_y)

    def marginal_mass_x(self, half) -> float:
        return _uniform_box_mass(self.x0, half)

    def marginal_mass_y(self, half) -> float:
        return _uniform_box_mass(self.y0, half)

    def _draw_far(self, count, center, rng) -> np.ndarray:
        out = np.empty((count, self.d))
        filled = 0
        while filled < count:
            need = count - filled
            z = rng.random((need + need // 8 + 16, self.d))
            z = z[rng.random(len(z)) >= self._profile(z, center)]
            take = min(len(z), need)
            out[filled:filled + take] = z[:take]
            filled += take
        return out

    def _draw(self, latent, center, rng) -> np.ndarray:
        out = np.empty((latent.size, self.d))
        near = latent == 0
        k = int(near.sum())
        out[near] = center + self.m ** (-1.0 / self.d) * _sample_bump((k, self.d), rng).reshape(k, self.d)
        out[~near] = self._draw_far(latent.size - k, center, rng)
        return out

    def sample_latent(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        p = np.clip(self.latent_matrix.ravel(), 0.0, None)
        cell = rng.choice(4, size=n, p=p / p.sum())
        return cell >> 1, cell & 1

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        xbar, ybar = self.sample_latent(n, rng)
        return self._draw(xbar, self.x0, rng), self._draw(ybar, self.y0, rng)


class SampleFile:
    """Pairs read from a file of little-endian float64 rows ``(x_1..x_d, y_1..y_d)``.

    Samples are consumed in file order.  Marginal box masses default to the
    uniform law on the unit cube; pass callables to override.
    """

    def __init__(self, path, d: int, x0=None, y0=None, marginal_x=None, marginal_y=None):
        raw = np.fromfile(Path(path), dtype="<f8")
        if raw.size % (2 * d):
            raise ValueError(f"{path}: size is not a multiple of {2 * d} doubles")
        self.rows = raw.reshape(-1, 2 * d)
        self.d = d
        self.x0 = _center(x0, d)
        self.y0 = _center(y0, d)
        self._mx = marginal_x or (lambda half: _uniform_box_mass(self.x0, half))
        self._my = marginal_y or (lambda half: _uniform_box_mass(self.y0, half))
        self._pos = 0

    truth = None

    def marginal_mass_x(self, half) -> float:
        return self._mx(np.broadcast_to(half, (self.d,)))

    def marginal_mass_y(self, half) -> float:
        return self._my(np.broadcast_to(half, (self.d,)))

    def sample(self, n: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
        if self._pos + n > len(self.rows):
            raise ValueError(f"sample file exhausted: need {n}, have {len(self.rows) - self._pos}")
        block = self.rows[self._pos:self._pos + n]
        self._pos += n
        return block[:, :self.d], block[:, self.d:]


@dataclass(frozen=True)
class BinarizationMap:
    """Indicator ``1{X not in box}`` for each party's box around its point."""

    x0: np.ndarray
    y0: np.ndarray
    half_x: np.ndarray
    half_y: np.ndarray
    m1: float
    m2: float

    def binarize(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        xb = np.any(np.abs(np.atleast_2d(x) - self.x0) > self.half_x, axis=1)
        yb = np.any(np.abs(np.atleast_2d(y) - self.y0) > self.half_y, axis=1)
        return xb.astype(np.uint8), yb.astype(np.uint8)


@dataclass
class DensityConfig:
    d: int = 1
    beta: float = 1.0
    k: float = 2 ** 16
    mode: str = "interactive"  # or "oneway"
    x0: object = None
    y0: object = None
    delta_max: float = 1.0
    clamp: bool = False
    lipschitz: float | None = None  # carried as metadata only

    def __post_init__(self):
        if self.mode not in ("oneway", "interactive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.d < 1 or self.beta <= 0:
            raise ValueError("need d >= 1 and beta > 0")

    @property
    def kernel_order(self) -> int:
        return 1 if self.beta <= 2 else int(math.floor(self.beta))


@dataclass(frozen=True)
class TermPlan:
    """One box pair of the kernel expansion, estimated by one protocol run."""

    weight: float
    radii_x: tuple[int, ...]
    radii_y: tuple[int, ...]
    binarizer: BinarizationMap
    n: int
    schedule: Schedule
    budget: float

    @property
    def m1(self) -> float:
        return self.binarizer.m1

    @property
    def m2(self) -> float:
        return self.binarizer.m2


@dataclass(frozen=True)
class DensityPlan:
    config: DensityConfig
    h: float
    kernel: KernelSpec
    terms: tuple[TermPlan, ...]

    @property
    def m1(self) -> float:
        return self.terms[0].m1

    @property
    def m2(self) -> float:
        return self.terms[0].m2

    @property
    def n(self) -> int:
        return self.terms[0].n

    @property
    def schedule(self) -> Schedule:
        return self.terms[0].schedule

    @property
    def total_samples(self) -> int:
        return sum(t.n for t in self.terms)


def target_m(config: DensityConfig, budget: float) -> float:
    """Inverse box probability the plan aims for at a given per-term budget."""
    expo = config.d / (config.d + 2 * config.beta)
    if config.mode == "interactive":
        return budget ** expo
    return (budget / math.log2(budget)) ** expo


def samples_for(config: DensityConfig, m1: float, m2: float, budget: float) -> int:
    dm = config.delta_max
    if config.mode == "interactive":
        return int(math.floor(min(m1, m2) * budget * math.log(2) / (13 * (1 + dm))))
    per_sample = 2.2 * (1 + dm) / m1 * math.log2(m1 / 10)
    return int(math.floor((budget - 1) / per_sample))


def _solve_bandwidth(mass_fn, target_mass: float, d: int) -> float:
    """Smallest ``h`` with ``mass_fn(h) = target_mass`` (mass increasing in h)."""
    lo, hi = 0.0, 0.5
    if mass_fn(hi) < target_mass:
        raise BudgetTooSmallError("box mass target exceeds what the unit cube allows")
    return brentq(lambda h: mass_fn(h) - target_mass, lo, hi, xtol=1e-15, rtol=1e-14)


def plan(config: DensityConfig, source=None) -> DensityPlan:
    """Choose bandwidth, sample count and schedule for every kernel term.

    ``source`` supplies marginal box masses (uniform on the unit cube when
    omitted).
    """
    d = config.d
    x0, y0 = _center(config.x0, d), _center(config.y0, d)
    if source is None:
        mx = lambda half: _uniform_box_mass(x0, half)
        my = lambda half: _uniform_box_mass(y0, half)
    else:
        mx, my = source.marginal_mass_x, source.marginal_mass_y
    kern = kernel_coeffs(config.kernel_order, d)
    pairs = [(rx, wx, ry, wy) for rx, wx in kern.tensor_terms() for ry, wy in kern.tensor_terms()]
    budget = config.k / len(pairs)
    if budget <= 2:
        raise BudgetTooSmallError(f"budget {config.k} too small for {len(pairs)} kernel terms")
    m = target_m(config, budget)
    if not m > 10:
        raise BudgetTooSmallError(f"k={config.k} gives m={m:.4g} <= 10")
    ones = np.ones(d)
    if config.mode == "interactive":
        h = _solve_bandwidth(lambda h: max(mx(h * ones), my(h * ones)), 1.0 / m, d)
    else:
        h = _solve_bandwidth(lambda h: mx(h * ones), 1.0 / m, d)
    terms = []
    for rx, wx, ry, wy in pairs:
        hx, hy = h * np.array(rx, float), h * np.array(ry, float)
        m1, m2 = 1.0 / mx(hx), 1.0 / my(hy)
        if not (m1 > 10 and m2 > 10):
            raise BudgetTooSmallError(
                f"kernel box {rx}x{ry} has (m1, m2) = ({m1:.4g}, {m2:.4g}); need both > 10")
        if config.mode == "interactive":
            sched = tetration_schedule(min(m1, m2))
        else:
            sched = one_way_schedule(m1)
        sched.validate(m1, m2)
        n = samples_for(config, m1, m2, budget)
        if n < 1:
            raise BudgetTooSmallError(f"k={config.k} leaves no samples")
        binz = BinarizationMap(x0, y0, hx, hy, m1, m2)
        terms.append(TermPlan(wx * wy, tuple(rx), tuple(ry), binz, n, sched, budget))
    return DensityPlan(config, h, kern, tuple(terms))


@dataclass(frozen=True)
class DensityEstimate:
    p_hat: float
    bits_used: int
    plan: DensityPlan
    reports: tuple[EstimateReport, ...]

    @property
    def delta_hat(self) -> float:
        return self.reports[0].delta_hat


def estimate_density(config: DensityConfig, source, seed: int, engine: str = "sampled",
                     the_plan: DensityPlan | None = None) -> DensityEstimate:
    """Sample, binarize, run the protocol per kernel term and assemble the estimate."""
    pl = the_plan or plan(config, source)
    ss = np.random.SeedSequence(int(seed))
    data_ss, proto_ss = ss.spawn(2)
    data_rng = np.random.default_rng(data_ss)
    proto_rng = np.random.default_rng(proto_ss)
    total, bits, reports = 0.0, 0, []
    for t in pl.terms:
        x, y = source.sample(t.n, data_rng)
        xb, yb = t.binarizer.binarize(x, y)
        if engine == "exact":
            rand = SharedRandomness(int(proto_rng.integers(2 ** 63)), t.schedule.alphas)
            alice, _, tr = run_session(xb, yb, t.schedule, rand)
            u, nbits = alice.u_matrix(), tr.bit_count
        else:
            res = simulate_session(xb, yb, t.schedule, proto_rng)
            u, nbits = res.u, res.bit_count
        table = build_score_table(t.m1, t.m2, t.schedule)
        rep = estimate(u, yb, table, "B", delta_max=config.delta_max, clamp=config.clamp)
        reports.append(rep)
        box_prob = (1.0 + rep.delta_hat) / (t.m1 * t.m2)
        total += t.weight * box_prob
        bits += nbits
    p_hat = total / pl.h ** (2 * config.d)
    return DensityEstimate(float(p_hat), bits, pl, tuple(reports))
