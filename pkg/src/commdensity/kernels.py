"""Higher-order kernels built from nested centred box indicators.

``K(u) = sum_k c_k 1[-k, k](u)`` with ``k = 1..k0`` and ``k0 = floor(l/2) + 1``;
the d-dimensional kernel is the tensor product.  The coefficients solve a
small Vandermonde-type system, which gets ill-conditioned quickly, so only
modest orders are meaningful in double precision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelSpec:
    l: int
    coeffs: tuple[float, ...]
    d: int = 1

    @property
    def k0(self) -> int:
        return len(self.coeffs)

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        if self.d == 1 and u.shape[0] == 1:
            u = u.T
        out = np.ones(u.shape[0])
        for col in u.T:
            out *= sum(c * (np.abs(col) <= k) for k, c in enumerate(self.coeffs, start=1))
        return out

    def tensor_terms(self):
        """Yield ``(radii, weight)``: one box ``prod_j [-radii_j, radii_j]`` per term."""
        for combo in itertools.product(range(1, self.k0 + 1), repeat=self.d):
            w = float(np.prod([self.coeffs[k - 1] for k in combo]))
            yield combo, w

    def with_dimension(self, d: int) -> "KernelSpec":
        return KernelSpec(self.l, self.coeffs, d)


def kernel_coeffs(l: int, d: int = 1) -> KernelSpec:
    if l < 1:
        raise ValueError(f"kernel order must be >= 1, got {l}")
    k0 = l // 2 + 1
    ks = np.arange(1, k0 + 1, dtype=np.float64)
    js = 2 * np.arange(k0)
    a = 2.0 * ks[None, :] ** (js[:, None] + 1) / (js[:, None] + 1)
    b = np.zeros(k0)
    b[0] = 1.0
    coeffs = np.linalg.solve(a, b)
    spec = KernelSpec(l, tuple(float(c) for c in coeffs), d)
    resid = max(abs(kernel_moment(spec, j) - (j == 0)) for j in range(l + 1))
    if resid > 1e-6:
        raise ArithmeticError(f"order-{l} kernel moments off by {resid:.3g}")
    return spec


def kernel_moment(spec: KernelSpec, j: int) -> float:
    """``int u**j K(u) du`` of the one-dimensional factor."""
    if j < 0:
        raise ValueError("moment order must be >= 0")
    if j % 2:
        return 0.0
    return float(sum(2.0 * k ** (j + 1) / (j + 1) * c
                     for k, c in enumerate(spec.coeffs, start=1)))


def tensor_moment(spec: KernelSpec, powers) -> float:
    """Mixed moment ``int prod_j u_j**p_j K(u) du`` of the d-dimensional kernel."""
    if len(powers) != spec.d:
        raise ValueError("need one power per dimension")
    return float(np.prod([kernel_moment(spec, p) for p in powers]))
