"""Seeded Monte Carlo sweeps of the density estimator over communication budgets.

Records go to a CSV with a fixed column order; a JSON summary sits next to
it.  Output depends only on the configuration, so reruns are byte-identical
(wall-clock timing is opt-in for that reason).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from .density import BudgetTooSmallError, DensityConfig, TestDensity, estimate_density, plan
from .protocol import GOLDEN, mix64
from .schedules import (
    interactive_comm_bound,
    interactive_mse_bounds,
    one_way_comm_bound,
    one_way_mse_bound,
)

RECORD_COLUMNS = ("k", "mode", "trial", "seed", "m1", "m2", "n", "r", "bits_used",
                  "delta_hat", "p_hat", "truth", "squared_error")


@dataclass
class ExperimentConfig:
    modes: tuple = ("oneway", "interactive")
    k_grid: tuple = tuple(2 ** e for e in range(12, 19))
    d: int = 1
    beta: float = 1.0
    trials: int = 200
    seed: int = 0
    out: str | None = None
    clamp: bool = False
    delta_max: float = 1.0
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        self.modes = tuple(self.modes)
        self.k_grid = tuple(float(k) if not float(k).is_integer() else int(k) for k in self.k_grid)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
            raise ValueError("k grid must be strictly increasing")


@dataclass
class TrialRecord:
    k: float
    mode: str
    trial: int
    seed: int
    m1: float
    m2: float
    n: int
    r: int
    bits_used: int
    delta_hat: float
    p_hat: float
    truth: float
    squared_error: float
    wall_time: float = 0.0


def trial_seed(base_seed: int, trial: int) -> int:
    """Per-trial seed shared by all modes, so paired comparisons see one sample path."""
    return mix64(mix64(base_seed + GOLDEN) + (trial + 1) * GOLDEN) >> 1


def benchmark_density(k: float, d: int, beta: float) -> TestDensity:
    """Hard instance at the interactive scale ``m = k^{d/(d+2 beta)}``, bump height ``m^{-beta/d}``."""
    m = k ** (d / (d + 2 * beta))
    return TestDensity(m, m ** (-beta / d), d)


def _run_point(args):
    k, mode, cfg, trials = args
    td = benchmark_density(k, cfg.d, cfg.beta)
    dcfg = DensityConfig(d=cfg.d, beta=cfg.beta, k=k, mode=mode,
                         delta_max=cfg.delta_max, clamp=cfg.clamp)
    try:
        pl = plan(dcfg, td)
    except BudgetTooSmallError as exc:
        return k, mode, None, str(exc)
    out = []
    for trial in trials:
        seed = trial_seed(cfg.seed, trial)
        t0 = time.perf_counter()
        est = estimate_density(dcfg, td, seed, the_plan=pl)
        wall = time.perf_counter() - t0
        out.append(TrialRecord(k, mode, trial, seed, pl.m1, pl.m2, pl.total_samples,
                               pl.schedule.r, est.bits_used, est.delta_hat, est.p_hat,
                               td.truth, (est.p_hat - td.truth) ** 2, wall))
    return k, mode, out, None


def binarized_delta(td: TestDensity, pl) -> float:
    """True correlation offset of the first term's indicator pair."""
    t = pl.terms[0]
    prob = td.box_probability(t.binarizer.half_x, t.binarizer.half_y)
    return prob * t.m1 * t.m2 - 1.0


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    summary: list = field(default_factory=list)

    def points(self, mode: str) -> list[tuple[float, float]]:
        return [(row["k"], row["mean_squared_error"]) for row in self.summary
                if row["mode"] == mode and not row["skipped"]]

    def records_csv(self) -> str:
        cols = RECORD_COLUMNS + (("wall_time",) if self.config.timing else ())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for rec in self.records:
            row = asdict(rec)
            w.writerow([_fmt(row[c]) for c in cols])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"config": asdict(self.config), "points": self.summary},
                          indent=2, sort_keys=True, default=str) + "\n"

    def write(self, out) -> tuple[Path, Path]:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.records_csv())
        summ = out.with_name(out.stem + ".summary.json")
        summ.write_text(self.summary_json())
        return out, summ


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _summarize(cfg: ExperimentConfig, k, mode, recs, skipped_reason) -> dict:
    row = {"k": k, "mode": mode, "skipped": skipped_reason is not None,
           "reason": skipped_reason or ""}
    if recs is None:
        return row
    td = benchmark_density(k, cfg.d, cfg.beta)
    dcfg = DensityConfig(d=cfg.d, beta=cfg.beta, k=k, mode=mode, delta_max=cfg.delta_max)
    pl = plan(dcfg, td)
    sq = np.array([r.squared_error for r in recs])
    dh = np.array([r.delta_hat for r in recs])
    bits = np.array([r.bits_used for r in recs], dtype=float)
    dtrue = binarized_delta(td, pl)
    t = pl.terms[0]
    if mode == "oneway":
        comm = one_way_comm_bound(t.m1, t.n, dtrue)
        mse_bound = one_way_mse_bound(t.m1, t.m2, t.n, dtrue)
    else:
        comm = interactive_comm_bound(t.m1, t.m2, t.n, dtrue, t.schedule.r)
        mse_bound = max(interactive_mse_bounds(t.m1, t.m2, t.n, dtrue))
    single_term = len(pl.terms) == 1
    row.update({
        "trials": len(recs),
        "m1": pl.m1, "m2": pl.m2, "n": pl.total_samples, "r": pl.schedule.r, "h": pl.h,
        "truth": td.truth,
        "binarized_delta": dtrue,
        "mean_squared_error": float(sq.mean()),
        "median_squared_error": float(np.median(sq)),
        "mean_bits": float(bits.mean()),
        "budget_ok": bool(bits.mean() <= k),
        "comm_bound_bits": comm,
        "comm_bound_ok": bool(bits.mean() <= comm) if single_term else None,
        "delta_mse": float(np.mean((dh - dtrue) ** 2)),
        "delta_mse_bound": mse_bound,
        "delta_mse_ok": bool(np.mean((dh - dtrue) ** 2) <= mse_bound) if single_term else None,
    })
    return row


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    jobs = [(k, mode, cfg, range(cfg.trials)) for k in cfg.k_grid for mode in cfg.modes]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    mode_rank = {m: i for i, m in enumerate(cfg.modes)}
    results.sort(key=lambda r: (r[0], mode_rank[r[1]]))
    records, summary = [], []
    for k, mode, recs, reason in results:
        summary.append(_summarize(cfg, k, mode, recs, reason))
        records.extend(sorted(recs or [], key=lambda r: r.trial))
    res = SweepResult(cfg, records, summary)
    if cfg.out:
        res.write(cfg.out)
    return res


def fit_exponent(points) -> tuple[float, float, float]:
    """OLS of ``log(mse)`` on ``log(k)``; returns ``(slope, intercept, stderr)``."""
    pts = [(float(k), float(v)) for k, v in points]
    if len(pts) < 3 or len({k for k, _ in pts}) < 3:
        raise ValueError("need at least three distinct grid points")
    lk = np.log([k for k, _ in pts])
    lv = np.log([v for _, v in pts])
    fit = stats.linregress(lk, lv)
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def one_way_flatness(points, d: int = 1, beta: float = 1.0) -> float:
    """max/min of ``mse * (k / log k)^{2 beta/(d + 2 beta)}`` over the grid."""
    e = 2 * beta / (d + 2 * beta)
    vals = [v * (k / math.log(k)) ** e for k, v in points]
    return max(vals) / min(vals)


def paired_sign_test(records, k) -> tuple[int, int, float]:
    """Trials at budget ``k`` where interactive beats one-way, and the one-sided p-value."""
    by = {}
    for r in records:
        if r.k == k:
            by.setdefault(r.trial, {})[r.mode] = r.squared_error
    pairs = [v for v in by.values() if "oneway" in v and "interactive" in v]
    wins = sum(v["interactive"] < v["oneway"] for v in pairs)
    ties = sum(v["interactive"] == v["oneway"] for v in pairs)
    n = len(pairs) - ties
    p = stats.binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return wins, n, float(p)
