"""Numerical checks of strong data-processing constants for binary pairs.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Joint2x2Law:
    matrix: np.ndarray

    def __post_init__(self):
        p = np.array(self.matrix, dtype=np.float64)
        if p.shape != (2, 2):
            raise ValueError("law must be 2x2")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"not a probability matrix: {p.tolist()}")
        if np.any(p.sum(axis=0) <= 0) or np.any(p.sum(axis=1) <= 0):
            raise ValueError("degenerate marginal")
        p.setflags(write=False)
        object.__setattr__(self, "matrix", p)

    @property
    def px(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def channel(self) -> np.ndarray:
        """``P(y | x)`` with rows indexed by x."""
        return self.matrix / self.px[:, None]

    @classmethod
    def family(cls, m: float, delta: float, m2: float | None = None) -> "Joint2x2Law":
        """Biased Bernoulli law with ``P(X=0)=1/m``, ``P(Y=0)=1/m2`` (default ``m``)."""
        m2 = m if m2 is None else m2
        a, b = 1.0 / m, 1.0 / m2
        base = np.outer([a, 1 - a], [b, 1 - b])
        return cls(base + delta * a * b * np.array([[1.0, -1.0], [-1.0, 1.0]]))

    @classmethod
    def symmetric(cls, p: float, delta: float) -> "Joint2x2Law":
        q = 1.0 - p
        return cls(np.array([[p * p * (1 + delta), p * q - p * p * delta],
                             [p * q - p * p * delta, q * q + p * p * delta]]))


def binary_kl(a: float, b: float) -> float:
    """``d(a || b)`` in nats."""
    out = 0.0
    if a > 0:
        out += a * math.log(a / b)
    if a < 1:
        out += (1 - a) * math.log((1 - a) / (1 - b))
    return out


def kl(q, p) -> float:
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    nz = q > 0
    return float(np.sum(q[nz] * np.log(q[nz] / p[nz])))


def kl_from_difference(p, diff) -> float:
    """``D(p + diff || p)`` without forming ``p + diff`` first.

    Summing ``p * phi(1 + diff/p)`` with ``phi(t) = t log t - t + 1`` keeps
    full relative accuracy when ``diff`` is tiny.
    """
    p = np.asarray(p, dtype=np.float64)
    e = np.asarray(diff, dtype=np.float64) / p
    terms = np.where(e <= -1.0, 1.0, (1.0 + e) * np.log1p(np.maximum(e, -1.0 + 1e-300)) - e)
    return float(np.sum(p * terms))


def mutual_information(matrix) -> float:
    """Mutual information of a 2x2 joint, in nats.

    Uses ``log1p`` of the deviation from independence, which stays accurate
    when the dependence is tiny.
    """
    p = np.asarray(matrix, dtype=np.float64)
    prod = np.outer(p.sum(axis=1), p.sum(axis=0))
    nz = p > 0
    return float(np.sum(p[nz] * np.log1p((p[nz] - prod[nz]) / prod[nz])))


def chi2_sstar_bound(m: float, delta: float) -> float:
    if not m > 1:
        raise ValueError(f"m must exceed 1, got {m}")
    return delta ** 2 / (m * math.log(m) - m + 1)


def maximal_correlation(law: Joint2x2Law) -> float:
    """Second singular value of ``P(x,y) / sqrt(P(x) P(y))``."""
    mat = law.matrix / np.sqrt(np.outer(law.px, law.py))
    s = np.linalg.svd(mat, compute_uv=False)
    if abs(s[0] - 1.0) > 1e-10:
        raise ArithmeticError(f"top singular value {s[0]!r} is not 1")
    return float(s[1])


def _input_grid(grid_size: int) -> np.ndarray:
    half = np.logspace(-12, math.log10(0.5), max(grid_size // 2, 2))
    return np.unique(np.concatenate([half, 1.0 - half]))


def sstar1_grid(law: Joint2x2Law, grid_size: int = 1000) -> float:
    """Largest ``D(Q_Y||P_Y) / D(Q_X||P_X)`` over a grid of input laws ``Q_X``.

    A lower estimate of the one-way data-processing constant.
    """
    if grid_size < 10:
        raise ValueError("grid_size must be at least 10")
    ch, px, py = law.channel, law.px, law.py
    best = 0.0
    for q in _input_grid(grid_size):
        diff_x = np.array([q - px[0], px[0] - q])
        dx = kl_from_difference(px, diff_x)
        if dx < 1e-300:
            continue
        best = max(best, kl_from_difference(py, diff_x @ ch) / dx)
    return best


@dataclass(frozen=True)
class ProjectionResult:
    matrix: np.ndarray
    lam: float
    iterations: int
    residual: float
    converged: bool
    # relative change of the cross ratio, which row/column scaling preserves
    factorization_residual: float = 0.0


def _cross_ratio(p) -> float:
    return p[0, 0] * p[1, 1] / (p[0, 1] * p[1, 0])


def iproject(law: Joint2x2Law, alpha: float, beta: float, tol: float = 1e-12,
             max_iter: int = 10_000) -> ProjectionResult:
    """Scale rows and columns of ``law`` until the marginals are ``[alpha, 1-alpha]`` and ``[beta, 1-beta]``."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    p = law.matrix
    rows = np.array([alpha, 1 - alpha])
    cols = np.array([beta, 1 - beta])
    f, g = np.ones(2), np.ones(2)
    resid, it = math.inf, 0
    while it < max_iter:
        it += 1
        f = rows / (p @ g)
        g = cols / (p.T @ f)
        q = f[:, None] * p * g[None, :]
        resid = max(np.abs(q.sum(axis=1) - rows).max(), np.abs(q.sum(axis=0) - cols).max())
        if resid < tol:
            break
    q = f[:, None] * p * g[None, :]
    return ProjectionResult(q, float(q[0, 0] - alpha * beta), it, float(resid), bool(resid < tol),
                            float(_cross_ratio(q) / _cross_ratio(p) - 1.0))


def projection_information(law: Joint2x2Law, alpha: float, beta: float, tol: float = 1e-15) -> float:
    return mutual_information(iproject(law, alpha, beta, tol=tol).matrix)


def phi_psi_ratio(p: float, delta: float, alpha: float, beta: float) -> float:
    """Ratio of the curvature gap of ``I(alpha, beta)`` to ``d(alpha||p) + d(beta||p)``."""
    if alpha == p and beta == p:
        raise ValueError("ratio is undefined at (alpha, beta) = (p, p)")
    law = Joint2x2Law.symmetric(p, delta)
    info = lambda a, b: projection_information(law, a, b)
    h = 1e-5 * p
    i_a = (info(p + h, p) - info(p - h, p)) / (2 * h)
    i_b = (info(p, p + h) - info(p, p - h)) / (2 * h)
    phi = info(p, p) - info(alpha, beta) + i_a * (alpha - p) + i_b * (beta - p)
    psi = binary_kl(alpha, p) + binary_kl(beta, p)
    return phi / psi


def phi_psi_sup(p: float, delta: float, grid: int = 50) -> float:
    """Largest ratio over a ``grid x grid`` log-spaced box ``(0.1p, 10p)^2``."""
    axis = np.logspace(math.log10(0.1 * p), math.log10(10 * p), grid + 2)[1:-1]
    best = -math.inf
    for a in axis:
        for b in axis:
            if a == p and b == p:
                continue
            best = max(best, phi_psi_ratio(p, delta, a, b))
    return best
