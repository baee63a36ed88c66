"""Acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult`.  Expensive shared work (the
Bernoulli Monte Carlo runs and the density sweep) is cached on a
:class:`Context` so the full suite pays for it once.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coding import Transcript, elias_gamma_decode, elias_gamma_encode, gamma_length
from .dpi_bounds import (
    Joint2x2Law,
    chi2_sstar_bound,
    iproject,
    maximal_correlation,
    phi_psi_sup,
    sstar1_grid,
)
from .estimator import build_score_table, estimate, mean_statistic_identity_check
from .harness import ExperimentConfig, fit_exponent, one_way_flatness, paired_sign_test, run_sweep
from .kernels import kernel_coeffs
from .prob_core import BernoulliFamily
from .protocol import SharedRandomness, replay_transcript, run_session, simulate_session
from .schedules import (
    Schedule,
    interactive_comm_bound,
    one_way_comm_bound,
    one_way_mse_bound,
    one_way_schedule,
    predicted_bounds,
    tetration_schedule,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] #{self.number:>2} {self.name}: {self.detail} ({self.seconds:.1f}s)"


@dataclass
class BernoulliRun:
    """Monte Carlo estimates ``delta_hat`` and transcript lengths for one configuration."""

    m1: float
    m2: float
    delta: float
    n: int
    schedule: Schedule
    delta_hat: np.ndarray
    bits: np.ndarray
    seconds: float

    @property
    def se(self) -> float:
        return float(self.delta_hat.std(ddof=1) / math.sqrt(self.delta_hat.size))


def bernoulli_run(m1, m2, delta, n, schedule, trials, seed) -> BernoulliRun:
    fam = BernoulliFamily(m1, m2, delta)
    table = build_score_table(m1, m2, schedule)
    rng = np.random.default_rng(seed)
    dh, bits = np.empty(trials), np.empty(trials)
    t0 = time.perf_counter()
    for t in range(trials):
        x, y = fam.sample(n, rng)
        res = simulate_session(x, y, schedule, rng)
        dh[t] = estimate(res.u, y, table).delta_hat
        bits[t] = res.bit_count
    return BernoulliRun(m1, m2, delta, n, schedule, dh, bits, time.perf_counter() - t0)


@dataclass
class Context:
    seed: int = 20240601
    trials: int = 400
    sweep_trials: int = 200
    workers: int = 1
    _runs: dict = field(default_factory=dict)
    _sweep: object = None

    def run(self, kind: str, delta: float, m: float = 20, n: int = 20000) -> BernoulliRun:
        key = (kind, delta, m, n)
        if key not in self._runs:
            sched = one_way_schedule(m) if kind == "oneway" else tetration_schedule(m)
            seed = self.seed + 1000 * len(self._runs)
            self._runs[key] = bernoulli_run(m, m, delta, n, sched, self.trials, seed)
        return self._runs[key]

    def sweep(self):
        if self._sweep is None:
            t0 = time.perf_counter()
            cfg = ExperimentConfig(trials=self.sweep_trials, seed=self.seed, workers=self.workers)
            self._sweep = (run_sweep(cfg), time.perf_counter() - t0)
        return self._sweep


DELTAS = (0.0, 0.5, 1.0)


def c01_unbiasedness(ctx: Context) -> CriterionResult:
    parts, ok, secs = [], True, 0.0
    for kind in ("oneway", "tetration"):
        for d in DELTAS:
            run = ctx.run(kind, d)
            secs += run.seconds
            z = (run.delta_hat.mean() - d) / run.se
            ok &= abs(z) <= 4
            parts.append(f"{kind} d={d}: z={z:+.2f}")
    ok &= secs <= 120
    return CriterionResult(1, "unbiasedness", bool(ok), "; ".join(parts) + f"; mc {secs:.1f}s")


def c02_mse_bound(ctx: Context) -> CriterionResult:
    run = ctx.run("oneway", 0.5)
    mse = float(np.mean((run.delta_hat - 0.5) ** 2))
    bound = one_way_mse_bound(20, 20, 20000, 0.5)
    return CriterionResult(2, "one-way MSE bound", mse <= bound, f"mse={mse:.4f} <= {bound:.4f}")


def c03_oneway_comm(ctx: Context) -> CriterionResult:
    parts, ok = [], True
    for d in DELTAS:
        run = ctx.run("oneway", d)
        bound = one_way_comm_bound(20, 20000, d)
        ok &= run.bits.mean() <= bound
        parts.append(f"d={d}: {run.bits.mean():.0f} <= {bound:.0f}")
    return CriterionResult(3, "one-way communication bound", bool(ok), "; ".join(parts))


def c04_interactive_comm(ctx: Context) -> CriterionResult:
    parts, ok = [], True
    sched = tetration_schedule(100)
    for d in DELTAS:
        run = ctx.run("tetration", d, m=100)
        bound = interactive_comm_bound(100, 100, 20000, d, sched.r)
        ok &= run.bits.mean() <= bound
        parts.append(f"d={d}: {run.bits.mean():.0f} <= {bound:.0f}")
    ok &= sched.r == 4
    return CriterionResult(4, "interactive communication bound", bool(ok),
                           f"r={sched.r}; " + "; ".join(parts))


def c05_rates(ctx: Context) -> CriterionResult:
    res, secs = ctx.sweep()
    inter = res.points("interactive")
    oneway = res.points("oneway")
    slope, _, se = fit_exponent(inter)
    flat = one_way_flatness(oneway)
    wins, npairs, p = paired_sign_test(res.records, 2 ** 16)
    comm_bad = [row["k"] for row in res.summary
                if not row["skipped"] and row["comm_bound_ok"] is False]
    budget_bad = [row["k"] for row in res.summary if not row["skipped"] and not row["budget_ok"]]
    skipped = [f"{row['mode']}@{row['k']}" for row in res.summary if row["skipped"]]
    slope_ok = -0.81 <= slope <= -0.52
    flat_ok = flat <= 3
    sign_ok = p < 0.01
    ok = slope_ok and flat_ok and sign_ok and secs <= 1800
    detail = (f"interactive slope={slope:.3f}+-{se:.3f} in [-0.81,-0.52]: {slope_ok}; "
              f"one-way flatness={flat:.2f} <= 3: {flat_ok}; "
              f"sign test at 2^16 wins={wins}/{npairs} p={p:.3g} < 0.01: {sign_ok}; "
              f"skipped={skipped}; comm violations={comm_bad}; over budget={budget_bad}; "
              f"sweep {secs:.0f}s")
    return CriterionResult(5, "rate exponents", ok, detail)


def c06_normalizer_identity(ctx: Context) -> CriterionResult:
    parts, ok = [], True
    for i, kind in enumerate(("oneway", "tetration")):
        sched = one_way_schedule(20) if kind == "oneway" else tetration_schedule(20)
        rng = np.random.default_rng(ctx.seed + 77 + i)
        ratio, se = mean_statistic_identity_check(20, 20, sched, 1.0, 20000, ctx.trials, rng)
        ok &= abs(ratio - 1) <= 4 * se
        parts.append(f"{kind}: {ratio:.4f} +- {se:.4f}")
    return CriterionResult(6, "normalizer identity", bool(ok), "; ".join(parts))


def builtin_schedules(m1, m2) -> dict:
    return {"oneway": one_way_schedule(m1), "tetration": tetration_schedule(min(m1, m2))}


def c07_information_floor(ctx: Context) -> CriterionResult:
    parts, ok = [], True
    for m1, m2 in ((20, 20), (100, 100), (100, 1000)):
        for name, sched in builtin_schedules(m1, m2).items():
            ib = build_score_table(m1, m2, sched).normalizer_B
            info = predicted_bounds(sched, m1, m2).info_odd
            ok &= ib >= 2 * info
            parts.append(f"({m1},{m2}) {name}: {ib / info:.2f}x")
    return CriterionResult(7, "normalizer vs information bound", bool(ok), "; ".join(parts))


def piecewise_moments(coeffs, j_max: int) -> list[Fraction]:
    """Exact moments of ``sum_k c_k 1[-k,k]`` integrated piece by piece over ``[a-1, a]``."""
    coeffs = [Fraction(c) for c in coeffs]
    k0 = len(coeffs)
    out = []
    for j in range(j_max + 1):
        total = Fraction(0)
        for a in range(1, k0 + 1):
            height = sum(coeffs[a - 1:])  # K on (a-1, a) and its mirror
            piece = Fraction(a ** (j + 1) - (a - 1) ** (j + 1), j + 1)
            total += height * piece * (1 + (-1) ** j)
        out.append(total)
    return out


def c08_kernels(ctx: Context) -> CriterionResult:
    worst = 0.0
    for l in range(1, 7):
        mom = piecewise_moments(kernel_coeffs(l).coeffs, l)
        worst = max(worst, abs(float(mom[0]) - 1), *(abs(float(v)) for v in mom[1:]))
    c2 = kernel_coeffs(2).coeffs
    exact = abs(c2[0] - 2 / 3) <= 1e-12 and abs(c2[1] + 1 / 12) <= 1e-12
    ok = worst <= 1e-9 and exact
    return CriterionResult(8, "kernel moments", ok,
                           f"worst moment error {worst:.2e}; l=2 coeffs {c2}")


def c09_elias_gamma(ctx: Context) -> CriterionResult:
    bad = 0
    for j in range(1, 100_001):
        code = elias_gamma_encode(j)
        dec, used = elias_gamma_decode(code)
        bad += (dec != j or used != len(code) or len(code) != 2 * (j.bit_length() - 1) + 1
                or gamma_length(j) != len(code))
    rng = np.random.default_rng(ctx.seed)
    mismatches = 0
    for s in range(100):
        sched = tetration_schedule(20) if s % 2 else one_way_schedule(20)
        n = int(rng.integers(1, 80))
        x, y = BernoulliFamily(20, 20, float(rng.uniform(0, 1))).sample(n, rng)
        rand = SharedRandomness(int(rng.integers(2 ** 63)), sched.alphas)
        alice, bob, tr = run_session(x, y, sched, rand)
        u = replay_transcript(tr.to_bytes(), rand)
        mismatches += not (np.array_equal(u, alice.u_matrix()) and np.array_equal(u, bob.u_matrix())
                           and Transcript.from_bytes(tr.to_bytes()) == tr)
    ok = bad == 0 and mismatches == 0
    return CriterionResult(9, "Elias gamma and transcript replay", ok,
                           f"codec failures {bad}/100000; replay mismatches {mismatches}/100")


DPI_GRID = [(m, d) for m in (15, 100, 1000, 10_000) for d in (0.1, 0.5, 0.9)]


def c10_dpi(ctx: Context) -> CriterionResult:
    worst_ratio, worst_rho = 0.0, 0.0
    for m, d in DPI_GRID:
        law = Joint2x2Law.family(m, d)
        worst_ratio = max(worst_ratio, sstar1_grid(law) / chi2_sstar_bound(m, d))
        worst_rho = max(worst_rho, abs(maximal_correlation(law) - d / (m - 1)))
    ok = worst_ratio <= 1 + 1e-6 and worst_rho <= 1e-10
    return CriterionResult(10, "DPI dominance", ok,
                           f"max sstar1/bound={worst_ratio:.3f}; max |rho - d/(m-1)|={worst_rho:.1e}")


PHI_SWEEP = [(p, d) for p in (0.01, 0.02, 0.05) for d in (0.05, 0.1)]
PHI_CONSTANT = 50.0


def projection_test_laws():
    laws = [Joint2x2Law.symmetric(p, d) for p, d in PHI_SWEEP]
    laws += [Joint2x2Law.family(m, d) for m, d in DPI_GRID]
    laws.append(Joint2x2Law(np.outer([0.3, 0.7], [0.6, 0.4])))
    return laws


def c11_iprojection(ctx: Context) -> CriterionResult:
    worst_res, not_conv = 0.0, 0
    targets = [(0.03, 0.05), (0.001, 0.2), (0.5, 0.5), (0.9, 0.1)]
    for law in projection_test_laws():
        for a, b in targets + [(law.px[0], law.py[0])]:
            pr = iproject(law, a, b, tol=1e-11, max_iter=10_000)
            worst_res = max(worst_res, pr.residual)
            not_conv += not pr.converged
    lam_err = 0.0
    for p, d in PHI_SWEEP:
        lam = iproject(Joint2x2Law.symmetric(p, d), p, p).lam
        lam_err = max(lam_err, abs(lam - d * p * p) / (d * p * p))
    sups = [phi_psi_sup(p, d) / (p * d * d) for p, d in PHI_SWEEP]
    ok = (worst_res < 1e-10 and not_conv == 0 and lam_err <= 1e-12
          and max(sups) <= PHI_CONSTANT and max(sups) / min(sups) < 10)
    return CriterionResult(11, "I-projection", ok,
                           f"max residual {worst_res:.1e}; unconverged {not_conv}; "
                           f"lambda rel err {lam_err:.1e}; sup/(p d^2) in "
                           f"[{min(sups):.3f}, {max(sups):.3f}] <= {PHI_CONSTANT:g}")


def c12_determinism(ctx: Context) -> CriterionResult:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for rep in range(2):
            out = Path(tmp) / f"run{rep}.csv"
            main(["sweep", "--k-grid", "16384,65536", "--trials", "3", "--seed", "7",
                  "--out", str(out), "--quiet"])
            outs.append((out.read_bytes(), out.with_name(out.stem + ".summary.json").read_bytes()))
    same = outs[0][0] == outs[1][0]
    rows = outs[0][0].count(b"\n") - 1
    ok = same and rows > 0
    return CriterionResult(12, "sweep determinism", ok, f"csv identical: {same}; {rows} rows")


CRITERIA = (c01_unbiasedness, c02_mse_bound, c03_oneway_comm, c04_interactive_comm, c05_rates,
            c06_normalizer_identity, c07_information_floor, c08_kernels, c09_elias_gamma, c10_dpi,
            c11_iprojection, c12_determinism)


def run_criterion(fn, ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = fn(ctx)
    except Exception as exc:  # a crash is a failure with a reason, not an abort
        num = CRITERIA.index(fn) + 1
        res = CriterionResult(num, fn.__name__, False, f"error: {exc!r}")
    res.seconds = time.perf_counter() - t0
    return res


def run_all(ctx: Context | None = None, only=None, echo=print) -> list[CriterionResult]:
    ctx = ctx or Context()
    out = []
    for i, fn in enumerate(CRITERIA, start=1):
        if only and i not in only:
            continue
        res = run_criterion(fn, ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return out
