"""Small value types shared by flows and oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AnharmonicSpec:
    """V(x) = M Omega**2 x**2/2 + lam x**4/4!."""

    mass: float = 1.0
    omega: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.omega < 0 or self.lam < 0:
            raise ValueError("omega and lambda must be non-negative")

    def coefficients(self) -> np.ndarray:
        """Power-series coefficients c_k of V(x) = sum c_k x**k."""
        return np.array([0.0, 0.0, 0.5 * self.mass * self.omega ** 2, 0.0, self.lam / 24.0])

    def derivatives(self, order: int) -> np.ndarray:
        """V^(p)(0) for p = 0..order."""
        return taylor_derivatives(self.coefficients(), order)


def taylor_derivatives(coeffs, order: int) -> np.ndarray:
    """V^(p)(0) = p! c_p, padded or cut to length order+1."""
    c = np.zeros(order + 1)
    n = min(len(coeffs), order + 1)
    c[:n] = np.asarray(coeffs, dtype=float)[:n]
    return c * np.array([math.factorial(p) for p in range(order + 1)], dtype=float)


def shifted_coefficients(coeffs, x0: float) -> np.ndarray:
    """Coefficients of V(x0 + y) in powers of y."""
    c = np.asarray(coeffs, dtype=float)
    n = len(c)
    out = np.zeros(n)
    for k in range(n):
        for j in range(k, n):
            out[k] += c[j] * math.comb(j, k) * x0 ** (j - k)
    return out


@dataclass
class SpectrumResult:
    """Lowest two levels and how well they are converged."""

    E0: float
    E1: float
    gap: float
    size: int
    convergence_estimate: float
    method: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.convergence_estimate < 0:
            raise ValueError("convergence estimate must be non-negative")
        if math.isfinite(self.E1) and self.E1 < self.E0:
            raise ValueError("E1 below E0")

    def as_dict(self) -> dict:
        d = {"method": self.method, "E0": self.E0, "E1": self.E1, "gap": self.gap,
             "size": self.size, "convergence_estimate": self.convergence_estimate}
        d["metadata"] = dict(self.metadata)
        return d
