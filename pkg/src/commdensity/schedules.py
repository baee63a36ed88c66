"""Refinement schedules and the communication/information bounds they imply.

Information quantities are in nats; communication bounds for transcripts are
converted to bits explicitly (``log2(e)`` factors) where they appear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .prob_core import ParameterDomainError, zero_branch_states

LOG2E = math.log2(math.e)


class InvalidScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Refinement factors ``alpha_1..alpha_r``; odd rounds are Alice's."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise InvalidScheduleError("schedule needs at least one round")
        # alpha == 1 is a silent round; the one-way protocol pads with those
        if any(not (a >= 1.0) or not math.isfinite(a) for a in alphas):
            raise InvalidScheduleError(f"refinement factors must be finite and >= 1: {alphas}")

    @property
    def r(self) -> int:
        return len(self.alphas)

    @property
    def odd_product(self) -> float:
        return float(np.prod(self.alphas[0::2]))

    @property
    def even_product(self) -> float:
        return float(np.prod(self.alphas[1::2])) if self.r > 1 else 1.0

    def is_valid(self, m1: float, m2: float, rtol: float = 1e-12) -> bool:
        return (self.odd_product <= m1 / 10 * (1 + rtol)
                and self.even_product <= m2 / 10 * (1 + rtol))

    def validate(self, m1: float, m2: float) -> "Schedule":
        if not self.is_valid(m1, m2):
            raise InvalidScheduleError(
                f"products ({self.odd_product:.6g}, {self.even_product:.6g}) exceed "
                f"(m1/10, m2/10) = ({m1 / 10:.6g}, {m2 / 10:.6g})")
        return self

    def to_config(self) -> str:
        alphas = ", ".join(f"{a:.17g}" for a in self.alphas)
        return f'{{"r": {self.r}, "alphas": [{alphas}]}}'

    @classmethod
    def from_config(cls, text: str) -> "Schedule":
        doc = json.loads(text)
        sched = cls(tuple(doc["alphas"]))
        if int(doc.get("r", sched.r)) != sched.r:
            raise InvalidScheduleError("r does not match the number of factors")
        return sched


def one_way_schedule(m1: float) -> Schedule:
    if not m1 > 10:
        raise ParameterDomainError(f"m1 must exceed 10, got {m1}")
    return Schedule((m1 / 10,))


def tetration(n: int) -> float:
    """``n``-th tetration of 2 (``inf`` once it overflows a float)."""
    t = 1.0
    for _ in range(n):
        t = math.inf if t >= 1024 else 2.0 ** t
    return t


def _exp(x: float) -> float:
    return math.inf if x > 709 else math.exp(x)


def tetration_rounds(m: float) -> int:
    """Smallest ``r0 >= 1`` with ``exp(tetration(r0) - 1) >= m / 10``."""
    if not m > 10:
        raise ParameterDomainError(f"m must exceed 10, got {m}")
    r0 = 0
    while _exp(tetration(r0) - 1.0) < m / 10:
        r0 += 1
    return max(r0, 1)


def tetration_schedule(m: float) -> Schedule:
    r0 = tetration_rounds(m)
    alphas = []
    for k in range(1, r0):
        a = math.exp(tetration(k) - tetration(k - 1))
        alphas += [a, a]
    last = (m / 10) * math.exp(1.0 - tetration(r0 - 1))
    alphas += [last, last]
    return Schedule(tuple(alphas))


@dataclass(frozen=True)
class BoundReport:
    """Closed-form bounds for a schedule.

    ``comm_*`` bound ``sum_i P(refiner bit 0, U^{i-1}=0) ln(alpha_i)`` (nats per
    sample); multiply by ``2 n (1+delta) log2(e)`` for expected transcript bits.
    ``info_*`` lower-bound ``lim delta^-2 sum_i I(U_i; observer | U^{i-1})``.
    """

    comm_odd: float
    comm_even: float
    info_odd: float
    info_even: float


def predicted_bounds(schedule: Schedule, m1: float, m2: float) -> BoundReport:
    schedule.validate(m1, m2)
    comm_odd = comm_even = 0.0
    odd_prod = even_prod = 1.0
    for i, a in enumerate(schedule.alphas, start=1):
        if i % 2 == 1:
            comm_odd += math.log(a) / even_prod
            odd_prod *= a
        else:
            comm_even += math.log(a) / odd_prod
            even_prod *= a
    return BoundReport(
        comm_odd=1.1 / m1 * comm_odd,
        comm_even=1.1 / m2 * comm_even,
        info_odd=odd_prod / (5 * m1 ** 2 * m2),
        info_even=even_prod / (5 * m1 * m2 ** 2),
    )


def exact_comm_terms(schedule: Schedule, m1: float, m2: float) -> tuple[float, float]:
    """Exact ``sum_i P^{(0)}(refiner bit 0, U^{i-1}=0) ln(alpha_i)`` per party."""
    states = zero_branch_states(m1, m2, schedule.alphas)
    odd = even = 0.0
    for i, a in enumerate(schedule.alphas, start=1):
        w = states[i - 1].joint0.base
        if i % 2 == 1:
            odd += w[0, :].sum() * math.log(a)
        else:
            even += w[:, 0].sum() * math.log(a)
    return odd, even


def tetration_series_sum(schedule: Schedule) -> tuple[float, float]:
    """The unscaled sums ``sum ln(alpha_i) prod alpha_j^{-1}`` for both parties."""
    odd = even = 0.0
    odd_prod = even_prod = 1.0
    for i, a in enumerate(schedule.alphas, start=1):
        if i % 2 == 1:
            odd += math.log(a) / even_prod
            odd_prod *= a
        else:
            even += math.log(a) / odd_prod
            even_prod *= a
    return odd, even


# End-to-end MSE and transcript-length bounds for the full protocol.

def one_way_mse_bound(m1, m2, n, delta):
    return 25 * (1 + delta) * m1 * m2 / n


def one_way_comm_bound(m1, n, delta):
    return 2.2 * (1 + delta) * n / m1 * math.log2(m1 / 10) + 1


def interactive_mse_bounds(m1, m2, n, delta):
    """Both printed forms of the interactive MSE bound; callers use the max."""
    m = min(m1, m2)
    return (25 * (1 + delta) * m1 * m2 ** 2 / (n * m),
            25 * (1 + delta) * m1 ** 2 * m2 / (m * n))


def interactive_comm_bound(m1, m2, n, delta, r):
    return 6 * (1 + delta) * n * (1 / m1 + 1 / m2) * LOG2E + (r + 1) / 2
