"""Closed-form schedule bounds next to their exact counterparts.

For each m: exact per-sample communication term vs its bound, and exact
normalizer vs the information floor, for the one-way and tetration schedules.
"""

from commdensity.estimator import build_score_table
from commdensity.schedules import exact_comm_terms, one_way_schedule, predicted_bounds, tetration_schedule


def main():
    print(f"{'m':>10} {'schedule':>10} {'r':>2} {'comm exact':>12} {'comm bound':>12} "
          f"{'I/n':>12} {'info floor':>12} {'ratio':>7}")
    for m in (12, 16, 20, 50, 100, 1e3, 1e4, 1e6):
        for name, s in (("oneway", one_way_schedule(m)), ("tetration", tetration_schedule(m))):
            b = predicted_bounds(s, m, m)
            odd, _ = exact_comm_terms(s, m, m)
            ib = build_score_table(m, m, s).normalizer_B
            print(f"{m:10.4g} {name:>10} {s.r:2d} {odd:12.4g} {b.comm_odd:12.4g} "
                  f"{ib:12.4g} {b.info_odd:12.4g} {ib / b.info_odd:7.2f}")


if __name__ == "__main__":
    main()
