"""Risk curves for both modes over a budget grid, with slope and separation checks.

    python scripts/rate_sweep.py --trials 200 --out runs/rates.csv
"""

import argparse
import math

from commdensity.harness import ExperimentConfig, fit_exponent, one_way_flatness, paired_sign_test, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lo", type=int, default=12, help="smallest log2 k")
    ap.add_argument("--hi", type=int, default=18, help="largest log2 k")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = ExperimentConfig(k_grid=tuple(2 ** e for e in range(args.lo, args.hi + 1)),
                           trials=args.trials, seed=args.seed, workers=args.workers, out=args.out)
    res = run_sweep(cfg)
    print(f"{'log2 k':>6} {'mode':>12} {'m1':>7} {'r':>2} {'bits':>8} {'mse':>10} {'delta mse / bound':>18}")
    for row in res.summary:
        if row["skipped"]:
            print(f"{math.log2(row['k']):6.0f} {row['mode']:>12}  skipped")
            continue
        print(f"{math.log2(row['k']):6.0f} {row['mode']:>12} {row['m1']:7.2f} {row['r']:2d} "
              f"{row['mean_bits']:8.0f} {row['mean_squared_error']:10.4g} "
              f"{row['delta_mse'] / row['delta_mse_bound']:18.3g}")
    inter, oneway = res.points("interactive"), res.points("oneway")
    slope, _, se = fit_exponent(inter)
    print(f"interactive slope {slope:.3f} +- {se:.3f} (target -2/3)")
    if len(oneway) >= 3:
        print(f"one-way slope {fit_exponent(oneway)[0]:.3f}, flatness {one_way_flatness(oneway):.2f}")
    for k in cfg.k_grid:
        wins, n, p = paired_sign_test(res.records, k)
        if n:
            print(f"k=2^{int(math.log2(k))}: interactive wins {wins}/{n}, one-sided p={p:.3g}")


if __name__ == "__main__":
    main()
