"""Exploratory: truncated tetration schedules with fewer rounds.

Keeps the first 2j factors of the tetration schedule and rescales the last
pair so both products still reach m/10.  No bound is claimed for these; the
script only reports the exact normalizer and the expected transcript length
per sample at delta = 0.
"""

import math

from commdensity.estimator import build_score_table
from commdensity.schedules import LOG2E, Schedule, exact_comm_terms, tetration_schedule


def truncated(m, pairs):
    full = tetration_schedule(m).alphas
    head = list(full[: 2 * (pairs - 1)])
    rest = (m / 10) / math.prod(head[0::2]) if head else m / 10
    return Schedule(tuple(head + [rest, rest]))


def main():
    for m in (100, 1e4, 1e8):
        full_pairs = tetration_schedule(m).r // 2
        print(f"m = {m:g}")
        for pairs in range(1, full_pairs + 1):
            s = truncated(m, pairs)
            ib = build_score_table(m, m, s).normalizer_B
            odd, even = exact_comm_terms(s, m, m)
            bits = 2 * (odd + even) * LOG2E
            print(f"  r={s.r}: I/n={ib:.4g}  approx bits/sample={bits:.4g}  "
                  f"information per bit={ib / bits:.4g}")


if __name__ == "__main__":
    main()
