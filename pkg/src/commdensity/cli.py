"""Command line entry point: ``commdensity <command> [flags]``.

``--config FILE`` reads flat ``key = value`` lines whose keys mirror the long
flags (``k-grid = 4096,8192``); anything given on the command line wins.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from . import acceptance
from .density import BudgetTooSmallError, DensityConfig, SampleFile, estimate_density, plan
from .dpi_bounds import Joint2x2Law, chi2_sstar_bound, maximal_correlation, phi_psi_sup, sstar1_grid
from .estimator import build_score_table, estimate
from .harness import ExperimentConfig, benchmark_density, fit_exponent, one_way_flatness, run_sweep
from .kernels import kernel_coeffs, kernel_moment
from .prob_core import make_family
from .protocol import SharedRandomness, run_session, simulate_session
from .schedules import (
    exact_comm_terms,
    interactive_comm_bound,
    interactive_mse_bounds,
    one_way_comm_bound,
    one_way_mse_bound,
    one_way_schedule,
    predicted_bounds,
    tetration_schedule,
)


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _k_value(text: str) -> float:
    v = float(text)
    return int(v) if v.is_integer() else v


def _k_grid(text: str) -> tuple:
    return tuple(_k_value(v) for v in str(text).replace(" ", "").split(",") if v)


def _schedule_for(mode: str, m1: float, m2: float):
    return one_way_schedule(m1) if mode == "oneway" else tetration_schedule(min(m1, m2))


def cmd_bernoulli(args) -> int:
    fam = make_family(args.m1, args.m2, args.delta)
    sched = _schedule_for(args.mode, args.m1, args.m2)
    rng = np.random.default_rng(args.seed)
    x, y = fam.sample(args.n, rng)
    if args.engine == "exact":
        alice, _, tr = run_session(x, y, sched, SharedRandomness(args.seed, sched.alphas))
        u, bits = alice.u_matrix(), tr.bit_count
    else:
        res = simulate_session(x, y, sched, rng)
        u, bits = res.u, res.bit_count
    rep = estimate(u, y, build_score_table(args.m1, args.m2, sched))
    if args.mode == "oneway":
        comm = one_way_comm_bound(args.m1, args.n, args.delta)
        mse = one_way_mse_bound(args.m1, args.m2, args.n, args.delta)
    else:
        comm = interactive_comm_bound(args.m1, args.m2, args.n, args.delta, sched.r)
        mse = max(interactive_mse_bounds(args.m1, args.m2, args.n, args.delta))
    _emit({"delta": args.delta, "delta_hat": rep.delta_hat, "bits": bits, "r": sched.r,
           "alphas": list(sched.alphas), "predicted_mse": rep.predicted_mse,
           "mse_bound": mse, "comm_bound_bits": comm})
    return 0


def cmd_density(args) -> int:
    cfg = DensityConfig(d=args.d, beta=args.beta, k=args.k, mode=args.mode, clamp=args.clamp)
    if args.data:
        source, truth = SampleFile(args.data, args.d), None
    else:
        source = benchmark_density(args.k, args.d, args.beta)
        truth = source.truth
    try:
        est = estimate_density(cfg, source, args.seed)
    except BudgetTooSmallError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    pl = est.plan
    _emit({"p_hat": est.p_hat, "truth": truth, "bits_used": est.bits_used, "k": args.k,
           "h": pl.h, "m1": pl.m1, "m2": pl.m2, "n": pl.total_samples, "r": pl.schedule.r,
           "terms": len(pl.terms)})
    return 0


def cmd_sweep(args) -> int:
    modes = (args.mode,) if args.mode else ("oneway", "interactive")
    cfg = ExperimentConfig(modes=modes, k_grid=args.k_grid, d=args.d, beta=args.beta,
                           trials=args.trials, seed=args.seed, out=args.out, clamp=args.clamp,
                           workers=args.workers, timing=args.timing)
    res = run_sweep(cfg)
    if args.quiet:
        return 0
    if not args.out:
        sys.stdout.write(res.records_csv())
        return 0
    for row in res.summary:
        if row["skipped"]:
            print(f"k={row['k']:<8} {row['mode']:<12} skipped: {row['reason']}")
        else:
            print(f"k={row['k']:<8} {row['mode']:<12} mse={row['mean_squared_error']:.4g} "
                  f"bits={row['mean_bits']:.0f} m1={row['m1']:.1f} r={row['r']}")
    for mode in modes:
        pts = res.points(mode)
        if len(pts) >= 3:
            slope, _, se = fit_exponent(pts)
            extra = f", flatness {one_way_flatness(pts, args.d, args.beta):.2f}" if mode == "oneway" else ""
            print(f"{mode}: slope {slope:.3f} +- {se:.3f}{extra}")
    return 0


def cmd_schedule(args) -> int:
    sched = _schedule_for(args.mode, args.m1, args.m2)
    b = predicted_bounds(sched, args.m1, args.m2)
    table = build_score_table(args.m1, args.m2, sched)
    odd, even = exact_comm_terms(sched, args.m1, args.m2)
    print(sched.to_config())
    _emit({"comm_odd": b.comm_odd, "comm_even": b.comm_even, "info_odd": b.info_odd,
           "info_even": b.info_even, "exact_comm_odd": odd, "exact_comm_even": even,
           "normalizer_B": table.normalizer_B, "normalizer_A": table.normalizer_A})
    return 0


def cmd_kernel(args) -> int:
    spec = kernel_coeffs(args.l, args.d)
    print("k,coefficient")
    for k, c in enumerate(spec.coeffs, start=1):
        print(f"{k},{c!r}")
    print("j,moment")
    for j in range(args.l + 2):
        print(f"{j},{kernel_moment(spec, j)!r}")
    return 0


def cmd_dpi(args) -> int:
    print("m,delta,chi2_bound,sstar1_grid,maximal_correlation,closed_form")
    for m in _floats(args.m_grid):
        for d in _floats(args.delta_grid):
            law = Joint2x2Law.family(m, d)
            print(f"{m:g},{d:g},{chi2_sstar_bound(m, d)!r},{sstar1_grid(law, args.grid)!r},"
                  f"{maximal_correlation(law)!r},{d / (m - 1)!r}")
    if args.phi:
        print("p,delta,phi_psi_sup,normalized")
        for p in _floats(args.p_grid):
            for d in _floats(args.delta_grid):
                s = phi_psi_sup(p, d)
                print(f"{p:g},{d:g},{s!r},{s / (p * d * d)!r}")
    return 0


def cmd_selftest(args) -> int:
    ctx = acceptance.Context(seed=args.seed, trials=args.trials, sweep_trials=args.sweep_trials,
                             workers=args.workers)
    only = {int(v) for v in args.only.split(",")} if args.only else None
    results = acceptance.run_all(ctx, only)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {failed}" if failed else ""))
    return 1 if failed else 0


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, default=float))


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="commdensity", description=__doc__.splitlines()[0])
    top.add_argument("--config", help="flat key = value file; flags override it")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, seed=0):
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        return p

    p = common(sub.add_parser("bernoulli", help="one protocol run on the biased Bernoulli pair"))
    p.add_argument("--m1", type=float, default=20.0)
    p.add_argument("--m2", type=float, default=20.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--mode", choices=("oneway", "interactive"), default="interactive")
    p.add_argument("--engine", choices=("sampled", "exact"), default="sampled")
    p.set_defaults(func=cmd_bernoulli)

    p = common(sub.add_parser("density", help="one density estimate at the centre point"))
    p.add_argument("--k", type=_k_value, default=2 ** 16)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mode", choices=("oneway", "interactive"), default="interactive")
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--data", help="binary file of little-endian float64 rows (x, y)")
    p.set_defaults(func=cmd_density)

    p = common(sub.add_parser("sweep", help="Monte Carlo risk curves over a budget grid"))
    p.add_argument("--k-grid", type=_k_grid, default=tuple(2 ** e for e in range(12, 19)))
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mode", choices=("oneway", "interactive"), default=None,
                   help="run one mode only (default: both, paired)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--out", help="CSV path; a .summary.json is written beside it")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--timing", action="store_true", help="add a wall_time column")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("schedule", help="print a schedule and its bounds"))
    p.add_argument("--m1", type=float, default=100.0)
    p.add_argument("--m2", type=float, default=100.0)
    p.add_argument("--mode", choices=("oneway", "interactive"), default="interactive")
    p.set_defaults(func=cmd_schedule)

    p = common(sub.add_parser("kernel", help="print kernel coefficients and moments"))
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--d", type=int, default=1)
    p.set_defaults(func=cmd_kernel)

    p = common(sub.add_parser("dpi", help="data-processing bound tables as CSV"))
    p.add_argument("--m-grid", default="15,100,1000,10000")
    p.add_argument("--delta-grid", default="0.1,0.5,0.9")
    p.add_argument("--p-grid", default="0.01,0.02,0.05")
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--phi", action="store_true", help="also tabulate the phi/psi envelope")
    p.set_defaults(func=cmd_dpi)

    p = common(sub.add_parser("selftest", help="run the acceptance suite"), seed=20240601)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--sweep-trials", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_selftest)
    return top


def read_config(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        cp.read_string("[flags]\n" + fh.read())
    return {k.replace("-", "_"): v for k, v in cp["flags"].items()}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre, _ = parser.parse_known_args(argv)
    if not pre.config:
        return
    sub = parser._subparsers._group_actions[0].choices[pre.command]
    known = {a.dest: a for a in sub._actions}
    values = {}
    for key, raw in read_config(pre.config).items():
        if key not in known:
            raise SystemExit(f"unknown config key {key!r}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            state = configparser.ConfigParser.BOOLEAN_STATES.get(raw.lower())
            if state is None:
                raise SystemExit(f"config key {key!r} needs a boolean, got {raw!r}")
            values[key] = state
        else:
            values[key] = raw  # string defaults go through the flag's type converter
    sub.set_defaults(**values)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
