"""Score functions, exact normalizers and the unbiased offset estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob_core import (
    BernoulliFamily,
    DegenerateLawError,
    RoundChannel,
    conditional_at_zero,
    zero_branch_states,
)
from .protocol import simulate_session
from .schedules import Schedule


class DegenerateScheduleError(ValueError):
    """The schedule reveals no information to the estimating party."""


@dataclass(frozen=True)
class RoundScores:
    """``gamma[c, u]`` is the score of message ``u`` given observer bit ``c``;
    ``mass[c, u]`` is ``P^{(0)}(C = c, U_i = u, U^{i-1} = 0)``."""

    round_index: int
    gamma: np.ndarray
    mass: np.ndarray

    @property
    def parity(self) -> str:
        return "odd" if self.round_index % 2 == 1 else "even"

    @property
    def second_moment(self) -> float:
        return float((self.gamma ** 2 * self.mass).sum())

    def conditional_means(self) -> np.ndarray:
        """``sum_u gamma[c, u] P(u | c, 0)`` for each ``c``; zero by construction."""
        cond = self.mass / self.mass.sum(axis=1, keepdims=True)
        return (self.gamma * cond).sum(axis=1)


@dataclass(frozen=True)
class ScoreTable:
    m1: float
    m2: float
    schedule: Schedule
    rounds: tuple[RoundScores, ...]

    @property
    def normalizer_B(self) -> float:
        """Per-sample ``I^B / n``: second moments of Bob's (odd-round) scores."""
        return sum(rs.second_moment for rs in self.rounds if rs.parity == "odd")

    @property
    def normalizer_A(self) -> float:
        return sum(rs.second_moment for rs in self.rounds if rs.parity == "even")

    @property
    def degenerate(self) -> bool:
        return not self.normalizer_B > 0.0

    def normalizer(self, party: str) -> float:
        return self.normalizer_B if party == "B" else self.normalizer_A


def build_score_table(m1: float, m2: float, schedule: Schedule) -> ScoreTable:
    states = zero_branch_states(m1, m2, schedule.alphas)
    rounds = []
    for i, a in enumerate(schedule.alphas, start=1):
        try:
            cz = conditional_at_zero(states[i - 1], RoundChannel.for_round(i, a))
        except DegenerateLawError as exc:
            raise DegenerateScheduleError(f"round {i}: {exc}") from exc
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma = np.where(cz.value > 0, cz.slope / cz.value, 0.0)
        mass = cz.value * cz.cond_mass[:, None]
        rounds.append(RoundScores(i, gamma, mass))
    return ScoreTable(float(m1), float(m2), schedule, tuple(rounds))


@dataclass(frozen=True)
class EstimateReport:
    delta_hat: float
    statistic: float
    normalizer: float
    predicted_mse: float
    party: str = "B"


def score_statistic(u: np.ndarray, obs: np.ndarray, table: ScoreTable, party: str = "B") -> float:
    """Sum of the party's scores over all samples.

    ``u`` is the ``(r, n)`` matrix of messages, ``obs`` the party's own bits.
    """
    want = "odd" if party == "B" else "even"
    obs = np.asarray(obs, dtype=np.intp)
    total = 0.0
    for rs in table.rounds:
        if rs.parity != want:
            continue
        i = rs.round_index
        ui = u[i - 1].astype(np.intp)
        if i > 1:
            live = u[i - 2] == 0
            counts = np.bincount(2 * obs[live] + ui[live], minlength=4)
        else:
            counts = np.bincount(2 * obs + ui, minlength=4)
        total += float(counts @ rs.gamma.ravel())
    return total


def estimate(u, obs, table: ScoreTable, party: str = "B", delta_max: float = 1.0,
             clamp: bool = False) -> EstimateReport:
    n = np.shape(u)[1]
    norm = n * table.normalizer(party)
    if not norm > 0.0:
        raise DegenerateScheduleError(f"party {party} receives no information")
    stat = score_statistic(u, obs, table, party)
    dhat = stat / norm
    if clamp:
        dhat = float(np.clip(dhat, -1.0, min(table.m1, table.m2) - 1.0))
    return EstimateReport(dhat, stat, norm, (1 + delta_max) / norm, party)


def mean_statistic_identity_check(m1: float, m2: float, schedule: Schedule, delta: float,
                                  n: int, trials: int, rng: np.random.Generator,
                                  party: str = "B") -> tuple[float, float]:
    """Monte Carlo ``E[Gamma] / (delta * I)`` and its standard error.

    The ratio is 1 because the statistic's mean is exactly linear in delta.
    """
    if delta == 0:
        raise ValueError("the ratio needs delta != 0")
    fam = BernoulliFamily(m1, m2, delta)
    table = build_score_table(m1, m2, schedule)
    norm = n * table.normalizer(party)
    stats = np.empty(trials)
    for t in range(trials):
        x, y = fam.sample(n, rng)
        u = simulate_session(x, y, schedule, rng).u
        stats[t] = score_statistic(u, y if party == "B" else x, table, party)
    ratio = stats / (delta * norm)
    return float(ratio.mean()), float(ratio.std(ddof=1) / np.sqrt(trials))
