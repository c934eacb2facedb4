"""Reference spectra by exact diagonalization.

Two independent routes: a harmonic-oscillator basis built from ladder
operators, and a finite-difference Hamiltonian on a uniform grid.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eig_banded, eigh

from .errors import NonConvergence
from .models import AnharmonicSpec, SpectrumResult


def _coeffs(v) -> np.ndarray:
    if isinstance(v, AnharmonicSpec):
        return v.coefficients()
    return np.asarray(v, dtype=float)


def _x_matrix(n: int, mass: float, freq: float, hbar: float) -> np.ndarray:
    """Position operator in the first n oscillator states."""
    off = np.sqrt(np.arange(1, n)) * math.sqrt(hbar / (2.0 * mass * freq))
    return np.diag(off, 1) + np.diag(off, -1)


def _hermite_levels(coeffs, n: int, mass: float, freq: float, hbar: float) -> np.ndarray:
    deg = len(coeffs) - 1
    # build in a larger space so truncated powers of x are exact in the kept block
    big = n + deg
    x = _x_matrix(big, mass, freq, hbar)
    v = np.zeros((big, big))
    xp = np.eye(big)
    for c in coeffs:
        if c != 0.0:
            v += c * xp
        xp = xp @ x
    # kinetic: p**2/2M = hbar w/2 (n + 1/2) - M w**2 x**2/2
    h = np.diag(hbar * freq * (np.arange(big) + 0.5)) - 0.5 * mass * freq ** 2 * (x @ x) + v
    h = h[:n, :n]
    return eigh(h, eigvals_only=True, subset_by_index=[0, 1], driver="evr")


def diag_hermite(v, basis_size: int = 200, basis_frequency: float | None = None,
                 mass: float = 1.0, hbar: float = 1.0, tol: float | None = None) -> SpectrumResult:
    """Lowest two levels of p**2/2M + V(x) in an oscillator basis.

    ``v`` is an AnharmonicSpec or power-series coefficients of V. The
    convergence estimate is the largest level change against basis_size/2.
    """
    if basis_size < 10:
        raise ValueError("basis_size must be at least 10")
    coeffs = _coeffs(v)
    if isinstance(v, AnharmonicSpec):
        mass = v.mass
    if basis_frequency is None:
        c2 = coeffs[2] if len(coeffs) > 2 else 0.0
        basis_frequency = math.sqrt(2 * c2 / mass) if c2 > 0 else 1.0
    e = _hermite_levels(coeffs, basis_size, mass, basis_frequency, hbar)
    e_half = _hermite_levels(coeffs, basis_size // 2, mass, basis_frequency, hbar)
    conv = float(np.max(np.abs(e - e_half)))
    if tol is not None and conv > tol:
        raise NonConvergence(f"oscillator basis not converged: {conv:.3e} > {tol:.3e}", conv)
    return SpectrumResult(float(e[0]), float(e[1]), float(e[1] - e[0]), basis_size, conv,
                          "hermite", {"basis_frequency": basis_frequency})


_FD_STENCILS = {
    2: [-2.0, 1.0],
    4: [-5 / 2, 4 / 3, -1 / 12],
    6: [-49 / 18, 3 / 2, -3 / 20, 1 / 90],
    8: [-205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560],
}


def _grid_levels(vfun, x_min, x_max, n, mass, hbar, order):
    x = np.linspace(x_min, x_max, n + 2)[1:-1]   # Dirichlet ends excluded
    h = x[1] - x[0]
    st = _FD_STENCILS[order]
    t = -hbar ** 2 / (2.0 * mass * h * h)
    bands = np.zeros((len(st), n))
    bands[0] = t * st[0] + vfun(x)
    for k in range(1, len(st)):
        bands[k, :n - k] = t * st[k]
    return eig_banded(bands, lower=True, select="i", select_range=(0, 1), eigvals_only=True)


def diag_grid(vfun, x_range=(-10.0, 10.0), n_points: int = 2000, mass: float = 1.0,
              hbar: float = 1.0, order: int = 8, tol: float | None = None) -> SpectrumResult:
    """Lowest two levels from a finite-difference Hamiltonian with Dirichlet ends.

    ``vfun`` is a vectorized callable, an AnharmonicSpec or power-series
    coefficients. The convergence estimate compares against half the points.
    """
    if n_points < 200:
        raise ValueError("n_points must be at least 200")
    if order not in _FD_STENCILS:
        raise ValueError(f"order must be one of {sorted(_FD_STENCILS)}")
    if isinstance(vfun, AnharmonicSpec):
        mass = vfun.mass
    if not callable(vfun):
        c = _coeffs(vfun)
        vfun = lambda x, c=c: np.polynomial.polynomial.polyval(x, c)  # noqa: E731
    e = _grid_levels(vfun, *x_range, n_points, mass, hbar, order)
    e_half = _grid_levels(vfun, *x_range, n_points // 2, mass, hbar, order)
    conv = float(np.max(np.abs(e - e_half)))
    if tol is not None and conv > tol:
        raise NonConvergence(f"grid not converged: {conv:.3e} > {tol:.3e}", conv)
    return SpectrumResult(float(e[0]), float(e[1]), float(e[1] - e[0]), n_points, conv,
                          "grid", {"x_range": list(x_range), "fd_order": order})
