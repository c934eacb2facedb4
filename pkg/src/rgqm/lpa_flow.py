"""Local potential approximation on a position grid.

One step integrates the complex mode m at constant background x0:

    V_{m-1}(x0) = V_m(x0) + (1/beta) log(1 + V_m''(x0)/(M omega_m**2))

The continuum variant replaces the mode sum by shells of width dk,
U_{k-dk} = U_k + (hbar dk/2pi) log(1 + U_k''/(Z k**2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .core import FlowParams, frequency_table
from .errors import ConvexityError

DELTA_LOG = 1e-12


class DerivScheme(str, Enum):
    CENTRAL = "central"
    POLYFIT = "polyfit"


@dataclass(frozen=True)
class PotentialGrid:
    """Samples of a running potential on a uniform grid."""

    x_min: float
    x_max: float
    n_points: int
    values: np.ndarray
    deriv_scheme: DerivScheme = DerivScheme.CENTRAL

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError("need at least 5 grid points")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        v = np.array(self.values, dtype=float).ravel()
        if v.shape != (self.n_points,):
            raise ValueError(f"expected {self.n_points} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "deriv_scheme", DerivScheme(self.deriv_scheme))
        if self.deriv_scheme is DerivScheme.POLYFIT and self.n_points < 7:
            raise ValueError("polyfit derivatives need at least 7 points")

    @classmethod
    def from_function(cls, f: Callable, x_min: float, x_max: float, n_points: int,
                      deriv_scheme=DerivScheme.CENTRAL) -> "PotentialGrid":
        x = np.linspace(x_min, x_max, n_points)
        return cls(x_min, x_max, n_points, f(x), deriv_scheme)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def with_values(self, values) -> "PotentialGrid":
        return PotentialGrid(self.x_min, self.x_max, self.n_points, values, self.deriv_scheme)

    def at(self, x: float) -> float:
        """Linear interpolation; only used for trace summaries."""
        return float(np.interp(x, self.x, self.values))


def _central_d2(v: np.ndarray, h: float) -> np.ndarray:
    # differences first, so equal neighbours give an exact zero
    d = np.diff(v)
    out = np.empty_like(v)
    out[1:-1] = d[1:] - d[:-1]
    # second-order one-sided stencil 2,-5,4,-1 written in difference form
    out[0] = -2.0 * d[0] + 3.0 * d[1] - d[2]
    out[-1] = 2.0 * d[-1] - 3.0 * d[-2] + d[-3]
    return out / (h * h)


def _polyfit_weights():
    # rows: second-derivative weights at offset j of a 7-point quartic fit
    offs = np.arange(7.0)
    vander = np.vander(offs, 5, increasing=True)
    pinv = np.linalg.pinv(vander)
    w = np.empty((7, 7))
    for j in range(7):
        # d2/dt2 of sum c_k t^k at t=j
        dv = np.array([0.0, 0.0, 2.0, 6.0 * j, 12.0 * j * j])
        w[j] = dv @ pinv
    return w


_PF_W = _polyfit_weights()


def _polyfit_d2(v: np.ndarray, h: float) -> np.ndarray:
    n = len(v)
    out = np.empty_like(v)
    for i in range(n):
        start = min(max(i - 3, 0), n - 7)
        out[i] = _PF_W[i - start] @ v[start:start + 7]
    return out / (h * h)


def second_derivatives(grid: PotentialGrid) -> np.ndarray:
    """V'' at every grid point with the grid's derivative scheme."""
    if grid.deriv_scheme is DerivScheme.POLYFIT:
        return _polyfit_d2(grid.values, grid.h)
    return _central_d2(grid.values, grid.h)


def second_derivative(grid: PotentialGrid, i: int) -> float:
    """V'' at grid index i.

    Central differences in the interior and second-order one-sided stencils at
    both ends; PolyFit uses a local quartic least-squares fit over 7 points.
    """
    if not -grid.n_points <= i < grid.n_points:
        raise IndexError(i)
    return float(second_derivatives(grid)[i])


@dataclass
class StepRecord:
    m: int
    omega_sq: float
    v_min: float
    v_at_zero: float
    v2_at_zero: float


@dataclass
class FlowTrace:
    records: list[StepRecord] = field(default_factory=list)
    status: str = "ok"
    warnings: list[str] = field(default_factory=list)

    def append(self, rec: StepRecord):
        if self.records and rec.m >= self.records[-1].m:
            raise ValueError("trace steps must strictly decrease")
        self.records.append(rec)

    def as_rows(self):
        return [(r.m, r.omega_sq, r.v_min, r.v_at_zero, r.v2_at_zero) for r in self.records]


def lpa_step(grid: PotentialGrid, m: int, params: FlowParams,
             delta_log: float = DELTA_LOG) -> PotentialGrid:
    """Integrate mode m at every grid point."""
    if not 1 <= m <= params.n_modes:
        raise ValueError(f"mode {m} outside 1..{params.n_modes}")
    w2 = frequency_table(params)[m]
    return _lpa_step_w(grid, m, w2, params, delta_log)


def _lpa_step_w(grid, m, w2, params, delta_log):
    arg = 1.0 + second_derivatives(grid) / (params.mass * w2)
    bad = np.nonzero(arg <= delta_log)[0]
    if bad.size:
        i = int(bad[0])
        raise ConvexityError(m, float(grid.x[i]), float(arg[i]))
    return grid.with_values(grid.values + np.log(arg) / params.beta)


def stability_ratio(grid: PotentialGrid, params: FlowParams) -> float:
    """Largest 4c/h**2 over the flow, c = 1/(beta (M omega_m**2 + V'')).

    Linearized, one step multiplies grid noise at the Nyquist wavenumber by
    1 - 4c/h**2, so values above 2 amplify rounding noise step after step.
    Uses the initial minimum curvature; returns inf if a weight can vanish.
    """
    table = frequency_table(params)
    floor = params.mass * table[1] + float(second_derivatives(grid).min())
    if floor <= 0:
        return math.inf
    return 4.0 / (params.beta * floor * grid.h ** 2)


def _record(grid: PotentialGrid, m: int, w2: float) -> StepRecord:
    d2 = second_derivatives(grid)
    inside = grid.x_min <= 0.0 <= grid.x_max
    v0 = grid.at(0.0) if inside else math.nan
    d20 = float(np.interp(0.0, grid.x, d2)) if inside else math.nan
    return StepRecord(m, float(w2), float(grid.values.min()), v0, d20)


def run_lpa_flow(initial: PotentialGrid, params: FlowParams,
                 delta_log: float = DELTA_LOG) -> tuple[PotentialGrid, FlowTrace]:
    """Apply lpa_step for m = N/2 down to 1.

    A ConvexityError escapes with ``trace`` holding the steps completed so far.
    """
    table = frequency_table(params)
    trace = FlowTrace()
    ratio = stability_ratio(initial, params)
    if ratio > 2.0:
        trace.warnings.append(
            f"grid spacing {initial.h:.3g} below the noise-stability bound "
            f"(ratio {ratio:.3g} > 2); rounding noise may grow")
    grid = initial
    for m in range(params.n_modes, 0, -1):
        try:
            grid = _lpa_step_w(grid, m, table[m], params, delta_log)
        except ConvexityError as err:
            trace.status = f"convexity failure at m={m}"
            err.trace = trace
            raise
        trace.append(_record(grid, m, table[m]))
    return grid, trace


@dataclass(frozen=True)
class GroundState:
    energy: float
    minimizers: tuple[float, ...]
    boundary_minimum: bool
    warnings: tuple[str, ...] = ()


def ground_state_energy(v0: PotentialGrid, rel_tol: float = 1e-10) -> GroundState:
    """Minimum of the flowed potential and every grid point attaining it.

    All local minima within rel_tol of the global minimum are listed, so a
    symmetric double well reports both wells.
    """
    v = v0.values
    x = v0.x
    vmin = float(v.min())
    tol = rel_tol * max(1.0, abs(vmin))
    idx = []
    for i in range(len(v)):
        left = v[i - 1] if i > 0 else math.inf
        right = v[i + 1] if i < len(v) - 1 else math.inf
        if v[i] - vmin <= tol and v[i] <= left and v[i] <= right:
            idx.append(i)
    boundary = 0 in idx or len(v) - 1 in idx
    warns = ("minimizer on grid boundary; enlarge the grid",) if boundary else ()
    return GroundState(vmin, tuple(float(x[i]) for i in idx), boundary, warns)


def zero_mode_energy(v0: PotentialGrid, params: FlowParams, refine: int = 32) -> float:
    """Finite-beta ground-state estimate that also integrates the zero mode.

    The mode flow leaves x0 unintegrated. Completing it with the zero-mode
    measure sqrt(M/(2 pi hbar**2 beta)) gives
        E = -(1/beta) log( sqrt(M/(2 pi hbar**2 beta)) * int dx0 exp(-beta V0) ),
    which differs from min V0 by about log(beta*Omega)/(beta) at large beta.
    The integral runs over a cubic-spline refinement of the grid.
    """
    p = params
    spline = CubicSpline(v0.x, v0.values)
    x = np.linspace(v0.x_min, v0.x_max, refine * (v0.n_points - 1) + 1)
    v = spline(x)
    vmin = float(v.min())
    w = np.exp(-p.beta * (v - vmin))
    integral = float(np.trapezoid(w, x))
    pref = math.sqrt(p.mass / (2.0 * math.pi * p.hbar ** 2 * p.beta))
    return vmin - math.log(pref * integral) / p.beta


# --- continuum shells --------------------------------------------------------

@numba.njit(cache=True)
def _d2_into(v, h, out):
    n = v.shape[0]
    inv = 1.0 / (h * h)
    for i in range(1, n - 1):
        out[i] = ((v[i + 1] - v[i]) - (v[i] - v[i - 1])) * inv
    out[0] = (-2.0 * (v[1] - v[0]) + 3.0 * (v[2] - v[1]) - (v[3] - v[2])) * inv
    out[n - 1] = (2.0 * (v[n - 1] - v[n - 2]) - 3.0 * (v[n - 2] - v[n - 3])
                  + (v[n - 3] - v[n - 4])) * inv


@numba.njit(cache=True)
def _shell_kernel(u, z, h, lam, dk, nsteps, hbar, mid, flow_z, delta_log):
    """In-place shell recursion. Returns (step, point) of a failure or (-1, -1)."""
    n = u.shape[0]
    du = np.empty(n)
    dz = np.empty(n)
    cu = hbar * dk / (2.0 * np.pi)
    cz = hbar * dk / (4.0 * np.pi)
    for s in range(nsteps):
        k = lam - s * dk
        if mid:
            k -= 0.5 * dk
        k2 = k * k
        _d2_into(u, h, du)
        for i in range(n):
            arg = 1.0 + du[i] / (z[i] * k2)
            if arg <= delta_log:
                return s, i
            u[i] += cu * np.log(arg)
        if flow_z:
            _d2_into(z, h, dz)
            _d2_into(u, h, du)
            for i in range(n):
                den = z[i] * k2 + du[i]
                if den <= delta_log:
                    return s, i
                z[i] += cz * dz[i] / den
    return -1, -1


def _n_shells(lam: float, dk: float) -> int:
    if not lam > 0:
        raise ValueError("cutoff must be positive")
    if not 0 < dk <= lam:
        raise ValueError("shell width must satisfy 0 < dk <= cutoff")
    return int(math.floor(lam / dk + 1e-9))


def _run_shells(u0: PotentialGrid, z0, lam, dk, params, shell_point, flow_z, delta_log):
    if shell_point not in ("mid", "upper"):
        raise ValueError("shell_point must be 'mid' or 'upper'")
    if u0.deriv_scheme is not DerivScheme.CENTRAL:
        raise ValueError("continuum shells support central differences only")
    nsteps = _n_shells(lam, dk)
    u = np.array(u0.values, dtype=float)
    z = np.array(z0, dtype=float)
    if np.any(z <= 0):
        raise ValueError("kinetic coefficient must be positive on the grid")
    step, i = _shell_kernel(u, z, u0.h, float(lam), float(dk), nsteps, params.hbar,
                            shell_point == "mid", flow_z, delta_log)
    if step >= 0:
        k = lam - step * dk - (0.5 * dk if shell_point == "mid" else 0.0)
        raise ConvexityError(m=step, x0=float(u0.x[i]), value=None,
                             trace={"k": k, "shell": step})
    return u, z


def run_continuum_lpa(initial: PotentialGrid, Z: float, Lambda: float, delta_k: float,
                      params: FlowParams, shell_point: str = "mid",
                      delta_log: float = DELTA_LOG) -> PotentialGrid:
    """Shell recursion from k = Lambda down to delta_k at constant Z.

    shell_point='upper' evaluates the log at the top edge k of each shell,
    the literal recursion and the exact continuum image of the discrete mode
    sum; 'mid' evaluates it at the shell centre k - dk/2, a second-order
    quadrature of the same limiting integral (see README).
    """
    if not Z > 0:
        raise ValueError("Z must be positive")
    z = np.full(initial.n_points, float(Z))
    u, _ = _run_shells(initial, z, Lambda, delta_k, params, shell_point, False, delta_log)
    return initial.with_values(u)
