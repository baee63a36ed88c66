"""Exact 2x2 laws for the biased Bernoulli family and the protocol's zero branch.

Every law that the protocol induces on the all-zero branch ``U^{i-1} = 0`` is
affine in the correlation offset ``delta``, so it is stored as a pair
``(base, slope)``.  Conditionals at ``delta = 0`` and their exact
``delta``-derivatives follow from the quotient rule, with no numerical
differentiation anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterDomainError(ValueError):
    """Raised when a family parameter falls outside its admissible range."""


class DegenerateLawError(ZeroDivisionError):
    """Raised when conditioning on an event of zero probability."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffineJoint2x2:
    """A 2x2 (sub)probability matrix ``base + delta * slope``.

    Rows index X and columns index Y.
    """

    base: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", _frozen(self.base))
        object.__setattr__(self, "slope", _frozen(self.slope))
        if self.base.shape != (2, 2) or self.slope.shape != (2, 2):
            raise ValueError("base and slope must be 2x2")

    def evaluate(self, delta: float) -> np.ndarray:
        return self.base + delta * self.slope

    def mass(self, delta: float = 0.0) -> float:
        return float(self.evaluate(delta).sum())

    def transpose(self) -> "AffineJoint2x2":
        return AffineJoint2x2(self.base.T, self.slope.T)

    def scale_rows(self, factors) -> "AffineJoint2x2":
        f = np.asarray(factors, dtype=np.float64)[:, None]
        return AffineJoint2x2(self.base * f, self.slope * f)

    def scale_cols(self, factors) -> "AffineJoint2x2":
        f = np.asarray(factors, dtype=np.float64)[None, :]
        return AffineJoint2x2(self.base * f, self.slope * f)


@dataclass(frozen=True)
class BernoulliFamily:
    """The biased Bernoulli pair with ``P(X=0) = 1/m1``, ``P(Y=0) = 1/m2``.

    The (0,0) cell carries ``(1 + delta) / (m1 m2)``; the other cells absorb
    the offset so that both marginals are free of ``delta``.
    """

    m1: float
    m2: float
    delta: float = 0.0

    def joint(self) -> AffineJoint2x2:
        return family_joint(self.m1, self.m2)

    def matrix(self) -> np.ndarray:
        return self.joint().evaluate(self.delta)

    @property
    def px(self) -> np.ndarray:
        return np.array([1.0 / self.m1, 1.0 - 1.0 / self.m1])

    @property
    def py(self) -> np.ndarray:
        return np.array([1.0 / self.m2, 1.0 - 1.0 / self.m2])

    @property
    def delta_range(self) -> tuple[float, float]:
        return -1.0, min(self.m1, self.m2) - 1.0

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` i.i.d. pairs; returns ``(x, y)`` as uint8 arrays."""
        p = np.clip(self.matrix().ravel(), 0.0, None)
        cell = rng.choice(4, size=n, p=p / p.sum())
        x = (cell >> 1).astype(np.uint8)
        y = (cell & 1).astype(np.uint8)
        return x, y


def family_joint(m1: float, m2: float) -> AffineJoint2x2:
    """Affine representation of the family for given inverse zero-probabilities."""
    a, b = 1.0 / m1, 1.0 / m2
    base = np.outer([a, 1.0 - a], [b, 1.0 - b])
    slope = a * b * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return AffineJoint2x2(base, slope)


def make_family(m1: float, m2: float, delta: float) -> BernoulliFamily:
    if not (m1 > 10 and m2 > 10):
        raise ParameterDomainError(f"m1 and m2 must exceed 10, got ({m1}, {m2})")
    hi = min(m1, m2) - 1.0
    if not (-1.0 <= delta <= hi):
        raise ParameterDomainError(f"delta={delta} outside [-1, {hi}]")
    return BernoulliFamily(float(m1), float(m2), float(delta))


@dataclass(frozen=True)
class RoundChannel:
    """Per-round refinement channel of the refining party.

    Given the refiner's bit ``b`` on the zero branch, ``U_i = 0`` with
    probability 1 when ``b = 0`` and ``1/alpha`` when ``b = 1``; an absorbed
    sample always emits 1.
    """

    alpha: float
    parity: str  # "odd": Alice (X) refines, "even": Bob (Y) refines

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ParameterDomainError(f"alpha must be >= 1, got {self.alpha}")
        if self.parity not in ("odd", "even"):
            raise ValueError("parity must be 'odd' or 'even'")

    @classmethod
    def for_round(cls, i: int, alpha: float) -> "RoundChannel":
        return cls(alpha, "odd" if i % 2 == 1 else "even")

    @property
    def rows(self) -> np.ndarray:
        """Rows ``[P(U=0), P(U=1)]`` for refiner bit 0, bit 1, and absorbed."""
        q = 1.0 / self.alpha
        return np.array([[1.0, 0.0], [q, 1.0 - q], [0.0, 1.0]])

    @property
    def survival(self) -> np.ndarray:
        return np.array([1.0, 1.0 / self.alpha])


@dataclass(frozen=True)
class ZeroBranchState:
    """Subnormalized law ``P(X, Y, U^{i-1} = 0)`` after ``round_index`` rounds."""

    joint0: AffineJoint2x2
    round_index: int = 0

    @classmethod
    def initial(cls, m1: float, m2: float) -> "ZeroBranchState":
        return cls(family_joint(m1, m2), 0)

    def mass(self, delta: float = 0.0) -> float:
        return self.joint0.mass(delta)

    def relative_offset(self, delta: float) -> float:
        """Correlation offset of the conditional law given the zero branch."""
        p = self.joint0.evaluate(delta)
        p = p / p.sum()
        return p[0, 0] / (p[0, :].sum() * p[:, 0].sum()) - 1.0


def advance_zero_branch(state: ZeroBranchState, ch: RoundChannel) -> ZeroBranchState:
    if state.mass(0.0) <= 0.0:
        raise DegenerateLawError("zero branch has no mass")
    if ch.parity == "odd":
        joint = state.joint0.scale_rows(ch.survival)
    else:
        joint = state.joint0.scale_cols(ch.survival)
    return ZeroBranchState(joint, state.round_index + 1)


@dataclass(frozen=True)
class ConditionalAtZero:
    """Message law of round ``i`` seen by the non-refining party.

    ``value[c, u]`` is ``P(U_i = u | C = c, U^{i-1} = 0)`` at ``delta = 0`` and
    ``slope[c, u]`` its exact derivative in ``delta``, where ``C`` is Y for odd
    rounds and X for even rounds.  ``cond_mass[c]`` is ``P(C = c, U^{i-1} = 0)``
    at ``delta = 0``.
    """

    value: np.ndarray
    slope: np.ndarray
    cond_mass: np.ndarray


def conditional_at_zero(state: ZeroBranchState, ch: RoundChannel) -> ConditionalAtZero:
    # orient so that rows are the refiner's variable, columns the observer's
    w = state.joint0 if ch.parity == "odd" else state.joint0.transpose()
    q = 1.0 / ch.alpha
    d0, d1 = w.base.sum(axis=0), w.slope.sum(axis=0)
    if np.any(d0 <= 0.0):
        raise DegenerateLawError("conditioning event has zero probability")
    n0 = np.stack([w.base[0] + q * w.base[1], (1.0 - q) * w.base[1]], axis=1)
    n1 = np.stack([w.slope[0] + q * w.slope[1], (1.0 - q) * w.slope[1]], axis=1)
    value = n0 / d0[:, None]
    slope = (n1 * d0[:, None] - n0 * d1[:, None]) / (d0[:, None] ** 2)
    return ConditionalAtZero(value, slope, d0.copy())


def closed_form_zero_mass(m1: float, m2: float, alphas, i: int) -> float:
    """``P^{(0)}(U^i = 0)`` as a product of the two single-party factors."""
    alphas = np.asarray(alphas, dtype=np.float64)[:i]
    odd = np.prod(alphas[0::2]) if i >= 1 else 1.0
    even = np.prod(alphas[1::2]) if i >= 2 else 1.0
    px0, py0 = 1.0 / m1, 1.0 / m2
    return ((1.0 - px0) / odd + px0) * ((1.0 - py0) / even + py0)


def zero_branch_states(m1: float, m2: float, alphas) -> list[ZeroBranchState]:
    """States before each round: entry ``i`` holds ``P(X, Y, U^i = 0)``."""
    states = [ZeroBranchState.initial(m1, m2)]
    for i, a in enumerate(alphas, start=1):
        states.append(advance_zero_branch(states[-1], RoundChannel.for_round(i, a)))
    return states
