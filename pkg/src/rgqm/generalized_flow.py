"""Integration of one mode pair around an arbitrary background.

Write S/hbar = beta [sum_p M omega_p**2 u_p u_{-p} + U(u)] and expand in the
fast pair (u_m, u_{-m}) to second order:

    P = M omega_m**2 + d2U/du_m du_{-m}
    B = d2U/du_m**2,  Bbar = d2U/du_{-m}**2
    C = dU/du_m,      Cbar = dU/du_{-m}

all evaluated at u_{+-m} = 0. The Gaussian integral gives

    dU = (1/2beta) log[(P**2 - B Bbar)/(M omega**2)**2]
         - [P C Cbar - (Bbar C**2 + B Cbar**2)/2]/(P**2 - B Bbar)

which is the step implemented here on truncated polynomials. The brute-force
oracle integrates the same mode numerically with Gauss-Hermite quadrature.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import series
from .core import FlowParams, ModeVector, frequency_table
from .coupling_flow import CouplingTable, naive_lpa_tower_step
from .errors import ConvexityError, QuadratureNonConvergence

DELTA_LOG = 1e-12


def _mw2(m: int, params: FlowParams) -> float:
    return params.mass * float(frequency_table(params).omega_sq[m])


@dataclass(frozen=True)
class GeneralizedPotential:
    """U_m as a truncated polynomial in the mode variables u_n, |n| <= cutoff."""

    poly: dict
    cutoff: int
    max_order: int

    def __post_init__(self):
        clean = {}
        for k, v in self.poly.items():
            k = tuple(sorted(k))
            if len(k) > self.max_order or v == 0:
                continue
            if sum(k) != 0:
                raise ValueError(f"monomial {k} violates momentum conservation")
            if any(abs(n) > self.cutoff for n in k):
                raise ValueError(f"monomial {k} has an index above the cutoff {self.cutoff}")
            clean[k] = float(np.real(v))
        object.__setattr__(self, "poly", clean)

    @classmethod
    def from_table(cls, t: CouplingTable) -> "GeneralizedPotential":
        return cls(t.to_poly(), t.cutoff, t.max_order)

    @classmethod
    def from_local(cls, derivs, cutoff: int, max_order: int) -> "GeneralizedPotential":
        return cls.from_table(CouplingTable.from_local(derivs, cutoff, max_order))

    def table(self) -> CouplingTable:
        return CouplingTable.from_poly(self.poly, self.max_order, self.cutoff)

    def coupling(self, momenta) -> float:
        k = tuple(sorted(momenta))
        return self.poly.get(k, 0.0) * series.multiplicity_factorial(k)

    def __call__(self, u: dict):
        """Evaluate at mode values; missing indices count as zero."""
        return series.evaluate(_restrict_to(self.poly, u), u)

    def derivative(self, indices, background: dict):
        """d^p U/du_{n_1}..du_{n_p} at the background; equals the x-space
        derivative scaled by (N+1)**(p/2)."""
        d = self.poly
        for n in indices:
            d = series.derivative(d, n)
        return series.evaluate(_restrict_to(d, background), background)


def _restrict_to(poly: dict, u: dict) -> dict:
    keys = set(u)
    return {k: v for k, v in poly.items() if all(n in keys for n in k)}


def background_values(bg: ModeVector, params: FlowParams) -> dict:
    return bg.normalized(params)


# --- Gaussian step --------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticForm2x2:
    """Symmetric matrix A (a12 stored once) and source J of the fast-pair integral

        int d^2y/pi exp(-y.A.y - 2 J.y) = det(A)**-0.5 exp(J.A^-1.J)
    """

    a11: float
    a12: float
    a22: float
    j1: float = 0.0
    j2: float = 0.0

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 ** 2

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def source_term(self) -> float:
        """J.A^-1.J"""
        d = self.det
        return (self.a22 * self.j1 ** 2 - 2 * self.a12 * self.j1 * self.j2 + self.a11 * self.j2 ** 2) / d


def assemble_A_J(U: GeneralizedPotential, background: ModeVector, m: int,
                 params: FlowParams) -> QuadraticForm2x2:
    """A and J for mode m at a real background path with modes below m.

    With u_m = (a+ib)/sqrt(2) and y = sqrt(beta M omega**2/2)(a, b):
    A = [[P+ReB, -ImB], [-ImB, P-ReB]]/(M omega**2), J = sqrt(beta/(M omega**2))(ReC, -ImC).
    """
    if background.m_max >= m:
        raise ValueError(f"background has modes up to {background.m_max}, must be below {m}")
    u = background.normalized(params)
    u[m] = 0.0
    u[-m] = 0.0
    mw2 = _mw2(m, params)
    p = mw2 + complex(U.derivative((m, -m), u)).real
    b = complex(U.derivative((m, m), u))
    c = complex(U.derivative((m,), u))
    s = math.sqrt(params.beta / mw2)
    return QuadraticForm2x2((p + b.real) / mw2, -b.imag / mw2, (p - b.real) / mw2,
                            s * c.real, -s * c.imag)


def gaussian_step(s_m: float, q: QuadraticForm2x2, params: FlowParams | None = None,
                  delta_log: float = DELTA_LOG) -> float:
    """S_{m-1}/hbar = S_m/hbar + log(det A)/2 - J.A^-1.J (actions in units of hbar)."""
    d = q.det
    if not d > delta_log or q.a11 <= 0:
        raise ConvexityError(-1, value=d)
    return s_m + 0.5 * math.log(d) - q.source_term()


# --- series step ----------------------------------------------------------------

def _fast_pieces(U: GeneralizedPotential, m: int):
    lo = m - 1
    pmm = series.restrict(series.derivative(series.derivative(U.poly, m), -m), lo)
    b = series.restrict(series.derivative(series.derivative(U.poly, m), m), lo)
    bb = series.restrict(series.derivative(series.derivative(U.poly, -m), -m), lo)
    c = series.restrict(series.derivative(U.poly, m), lo)
    cb = series.restrict(series.derivative(U.poly, -m), lo)
    return pmm, b, bb, c, cb


def generalized_potential_step(U: GeneralizedPotential, m: int, params: FlowParams,
                               source: bool = True, delta_log: float = DELTA_LOG
                               ) -> GeneralizedPotential:
    """U_{m-1} from U_m, re-expanded exactly to the stored order.

    ``source=False`` drops the J.A^-1.J part and keeps only the log.
    """
    if m < 1 or m > U.cutoff:
        raise ValueError(f"mode {m} outside 1..{U.cutoff}")
    deg = U.max_order
    mw2 = _mw2(m, params)
    pmm, b, bb, c, cb = _fast_pieces(U, m)
    p0 = mw2 + series.constant(pmm)
    if p0 / mw2 <= delta_log:
        raise ConvexityError(m, value=p0 / mw2)
    p = series.without_constant(pmm)
    # P**2 - B Bbar = p0**2 (1 + w)
    w = series.add(series.scale(p, 2.0 / p0), series.scale(series.mul(p, p, deg), 1.0 / p0 ** 2),
                   series.scale(series.mul(b, bb, deg), -1.0 / p0 ** 2))
    out = dict(series.restrict(U.poly, m - 1))
    logpart = series.log1p(w, deg)
    logpart[()] = logpart.get((), 0.0) + 2.0 * math.log(p0 / mw2)
    out = series.add(out, logpart, scale=[1.0, 0.5 / params.beta])
    if source and c:
        pfull = series.add({(): p0}, p)
        num = series.add(series.mul(pfull, series.mul(c, cb, deg), deg),
                         series.mul(bb, series.mul(c, c, deg), deg),
                         series.mul(b, series.mul(cb, cb, deg), deg), scale=[1.0, -0.5, -0.5])
        src = series.mul(num, series.inv1p(w, deg), deg)
        out = series.add(out, src, scale=[1.0, -1.0 / p0 ** 2])
    out = {k: v for k, v in series.truncate(out, deg).items() if sum(k) == 0}
    return GeneralizedPotential(out, m - 1, deg)


def run_generalized_flow(U: GeneralizedPotential, params: FlowParams, source: bool = True,
                         delta_log: float = DELTA_LOG):
    """Integrate every mode from U.cutoff down to 1; rows are (m, E0 so far, g^{0,0})."""
    rows = []
    for m in range(U.cutoff, 0, -1):
        U = generalized_potential_step(U, m, params, source, delta_log)
        rows.append((m, U.coupling(()), U.coupling((0, 0))))
    return U, rows


# --- brute-force oracle ------------------------------------------------------------

def polynomial_action(U: GeneralizedPotential, params: FlowParams):
    """Callable S/hbar = beta[sum_{p=1}^{cutoff} M omega_p**2 u_p u_{-p} + U(u)]."""
    w2 = frequency_table(params).omega_sq
    poly = dict(U.poly)
    for p in range(1, U.cutoff + 1):
        k = (-p, p)
        poly[k] = poly.get(k, 0.0) + params.mass * w2[p]

    def action(u: dict):
        return params.beta * series.evaluate(_restrict_to(poly, u), u)

    return action


def torus_taylor(func, indices, radius: float, n: int, max_deg: int, tol: float = 0.0) -> dict:
    """Taylor coefficients of an analytic function of several variables.

    ``func`` maps {index: complex array} to a complex array. The function is
    sampled on a polydisc torus of the given radius with n points per
    variable; coefficients of total degree <= max_deg are read off the FFT.
    Aliasing error is of order radius**n relative to the convergence radius.
    """
    d = len(indices)
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    u = {idx: g.ravel() for idx, g in zip(indices, grids)}
    vals = np.asarray(func(u), dtype=complex).reshape((n,) * d)
    coef = np.fft.fftn(vals) / n ** d
    out = {}
    for alpha in itertools.product(range(min(n, max_deg + 1)), repeat=d):
        deg = sum(alpha)
        if deg > max_deg:
            continue
        c = coef[alpha] / radius ** deg
        if abs(c) <= tol:
            continue
        key = tuple(sorted(itertools.chain.from_iterable([idx] * a for idx, a in zip(indices, alpha))))
        out[key] = c
    return out


def _quadratic_model(action, m: int, bg: dict, n_torus: int, radius: float):
    """Coefficients c_ab of z**a zbar**b, a+b <= 2, of the action in the fast pair."""
    size = next(iter(bg.values())).shape[0] if bg else 1
    z = radius * np.exp(2j * np.pi * np.arange(n_torus) / n_torus)
    za, zb = np.meshgrid(z, z, indexing="ij")
    u = {k: np.repeat(np.asarray(v, dtype=complex)[:, None], n_torus ** 2, axis=1) for k, v in bg.items()}
    u[m] = np.broadcast_to(za.ravel(), (size, n_torus ** 2))
    u[-m] = np.broadcast_to(zb.ravel(), (size, n_torus ** 2))
    vals = np.asarray(action(u), dtype=complex).reshape(size, n_torus, n_torus)
    c = np.fft.fft2(vals, axes=(1, 2)) / n_torus ** 2
    return {(a, b): c[:, a, b] / radius ** (a + b) for a in range(3) for b in range(3) if a + b <= 2}


def brute_force_step(action, m: int, params: FlowParams, background: dict | None = None,
                     n_quad: int = 24, max_quad: int = 384, rtol: float = 1e-8,
                     fast_order: int | None = None, n_torus: int = 16, torus_radius: float = 0.25,
                     width: float | None = None, norm_mass=None) -> np.ndarray:
    """S_{m-1}/hbar at background points by direct numerical integration of mode m.

    ``action(u)`` returns S/hbar for mode values u (dict index -> array); it
    must include the kinetic term of mode m. ``background`` maps indices
    |n| < m to 1D arrays of equal length (complex values are allowed: the
    result is then the analytic continuation). The integral runs over
    u_m = (a+ib)/sqrt(2), u_{-m} = (a-ib)/sqrt(2) with a tensor Gauss-Hermite
    rule whose order doubles until the relative change drops below rtol.
    Normalization makes the free action map to itself; ``norm_mass``
    (scalar or per-background array) replaces M in that normalization.

    With ``fast_order=2`` the integrand is first replaced by its exact
    quadratic Taylor model in (u_m, u_{-m}), read off an FFT torus; the
    integral is then the Gaussian one-loop integral the flow equations use.
    """
    bg = {k: np.atleast_1d(np.asarray(v, dtype=complex)) for k, v in (background or {}).items()}
    if any(abs(k) >= m for k in bg):
        raise ValueError("background indices must be below m")
    size = next(iter(bg.values())).shape[0] if bg else 1
    mw2 = _mw2(m, params)

    if fast_order == 2:
        c = _quadratic_model(action, m, bg, n_torus, torus_radius)

        def integrand_s(a, b):
            zp = (a + 1j * b) / math.sqrt(2.0)
            zm = (a - 1j * b) / math.sqrt(2.0)
            return (c[(0, 0)][:, None] + c[(1, 0)][:, None] * zp + c[(0, 1)][:, None] * zm
                    + c[(2, 0)][:, None] * zp ** 2 + c[(1, 1)][:, None] * zp * zm
                    + c[(0, 2)][:, None] * zm ** 2)
    elif fast_order is None:
        def integrand_s(a, b):
            u = {k: np.repeat(v[:, None], a.shape[-1], axis=1) for k, v in bg.items()}
            u[m] = np.broadcast_to((a + 1j * b) / math.sqrt(2.0), (size, a.shape[-1]))
            u[-m] = np.broadcast_to((a - 1j * b) / math.sqrt(2.0), (size, a.shape[-1]))
            return np.asarray(action(u), dtype=complex).reshape(size, -1)
    else:
        raise ValueError("fast_order must be None or 2")

    zero = np.zeros((1,))
    s0 = integrand_s(zero, zero)[:, 0]
    if width is None:
        h = 1e-3 / math.sqrt(params.beta * mw2)
        hh = np.array([h, -h])
        curv = float(np.real(integrand_s(hh, np.zeros(2))[0].sum() - 2 * s0[0]) / h ** 2)
        if not curv > 0:
            curv = 2.0 * params.beta * mw2 * 0.5
        width = math.sqrt(2.0 / curv)

    def integrate(n):
        t, wts = np.polynomial.hermite.hermgauss(n)
        ta, tb = np.meshgrid(t, t, indexing="ij")
        wa, wb = np.meshgrid(wts, wts, indexing="ij")
        a = width * ta.ravel()
        b = width * tb.ravel()
        ww = (wa * wb).ravel() * np.exp(ta.ravel() ** 2 + tb.ravel() ** 2)
        s = integrand_s(a, b) - s0[:, None]
        return width ** 2 * (np.exp(-s) @ ww)

    n = n_quad
    prev = integrate(n)
    while True:
        n *= 2
        cur = integrate(n)
        err = float(np.max(np.abs(cur - prev) / np.abs(cur)))
        if err <= rtol:
            break
        if n >= max_quad:
            raise QuadratureNonConvergence(
                f"Gauss-Hermite integral did not converge (relative change {err:.2e})", err)
        prev = cur
    if norm_mass is not None:
        mw2 = mw2 / params.mass * np.asarray(norm_mass)
    return s0 - np.log(cur * params.beta * mw2 / (2.0 * math.pi))


def brute_force_couplings(U: GeneralizedPotential, m: int, params: FlowParams,
                          indices=None, fast_order: int | None = 2, radius: float = 0.3,
                          n_torus_bg: int = 12, **quad) -> dict:
    """Couplings of U_{m-1} extracted from brute_force_step.

    S_{m-1} is sampled on a complex torus in the background variables
    ``indices`` (default: all of -(m-1)..m-1), the kinetic part is removed and
    the result divided by beta. Returns {sorted tuple: coupling}; only
    momentum-conserving tuples up to U.max_order are kept.
    """
    if indices is None:
        indices = list(range(-(m - 1), m))
    action = polynomial_action(U, params)
    w2 = frequency_table(params).omega_sq

    def s_prev(u):
        return brute_force_step(action, m, params, u, fast_order=fast_order, **quad)

    poly = torus_taylor(s_prev, list(indices), radius, n_torus_bg, U.max_order)
    out = {}
    for k, v in poly.items():
        if sum(k) != 0:
            continue
        val = v.real / params.beta
        if len(k) == 2 and k[0] == -k[1] and k[0] != 0:
            val -= params.mass * w2[abs(k[0])]
        out[k] = val * series.multiplicity_factorial(k)
    return out


# --- inconsistency and locality ---------------------------------------------------

def constant_background_increment(coeffs, x0: float, m: int, params: FlowParams,
                                  delta_log: float = DELTA_LOG) -> float:
    """(1/beta) log(1 + V''(x0)/(M omega_m**2)) for a polynomial V."""
    v2 = np.polynomial.polynomial.polyval(x0, np.polynomial.polynomial.polyder(coeffs, 2))
    arg = 1.0 + v2 / _mw2(m, params)
    if arg <= delta_log:
        raise ConvexityError(m, x0, arg)
    return math.log(arg) / params.beta


def quadratic_increment_local(coeffs, x0: float, m: int, params: FlowParams) -> float:
    """(1/beta) V''''(x0)/(M omega_m**2 + V''(x0)), the quadratic-mode increment."""
    pd = np.polynomial.polynomial
    v2 = pd.polyval(x0, pd.polyder(coeffs, 2))
    v4 = pd.polyval(x0, pd.polyder(coeffs, 4)) if len(coeffs) > 4 else 0.0
    return v4 / (_mw2(m, params) + v2) / params.beta


def inconsistency_gap(coeffs, m: int, params: FlowParams, x0: float = 0.0) -> float:
    """Second x0-derivative of the constant-background increment minus the
    quadratic-mode increment; closed form -(1/beta) V'''**2/(M omega**2 + V'')**2.

    The derivative is taken exactly with the Taylor-series log of the tower.
    """
    from .models import shifted_coefficients, taylor_derivatives
    c = shifted_coefficients(np.asarray(coeffs, dtype=float), x0)
    g = taylor_derivatives(c, max(len(c) - 1, 4))
    tower = naive_lpa_tower_step(g, m, params) - g
    return float(tower[2] - quadratic_increment_local(coeffs, x0, m, params))


def inconsistency_gap_closed_form(coeffs, m: int, params: FlowParams, x0: float = 0.0) -> float:
    pd = np.polynomial.polynomial
    v2 = pd.polyval(x0, pd.polyder(coeffs, 2))
    v3 = pd.polyval(x0, pd.polyder(coeffs, 3))
    return -(v3 ** 2) / (_mw2(m, params) + v2) ** 2 / params.beta


def locality_witness(coeffs, m: int, params: FlowParams, max_order: int = 6,
                     probes=(0, 1, 2)) -> dict:
    """Test whether one mode integration keeps the potential local.

    A local potential sum_n W(x(t_n)) has quadratic couplings g^{p,-p} equal
    to W''(x0) for every p. One generalized step from the local polynomial is
    taken and the quadratic couplings at the probe momenta are fitted by a
    single constant; the fit residual is the witness (zero iff local).
    """
    if max(probes) > m - 1:
        raise ValueError("probe momenta must lie below m")
    from .models import taylor_derivatives
    U = GeneralizedPotential.from_local(taylor_derivatives(coeffs, max_order), m, max_order)
    U1 = generalized_potential_step(U, m, params)
    vals = np.array([U1.coupling((-p, p)) for p in probes])
    fit = vals.mean()
    return {"probes": list(probes), "couplings": vals.tolist(), "fit": float(fit),
            "residual": float(np.max(np.abs(vals - fit)))}


def consistency_check(U: GeneralizedPotential, m: int, params: FlowParams,
                      delta_log: float = DELTA_LOG) -> dict:
    """Compare the constant-background reductions of one generalized step.

    The zero-momentum tower of the step (couplings g^{0..0}) is compared with
    the exact x0-derivatives of the constant-background increment, and the
    g^{p,-p} couplings (p != 0) with the quadratic-mode increment. Both
    differences vanish when the pair is consistent.
    """
    U1 = generalized_potential_step(U, m, params, delta_log=delta_log)
    g = np.array([U.coupling((0,) * k) for k in range(U.max_order + 1)])
    # the constant-background increment only sees the x0 tower plus g^{m,-m,0..0}
    gm = np.array([U.coupling((0,) * k + (m, -m)) for k in range(U.max_order - 1)])
    mw2 = _mw2(m, params)
    a = np.zeros(U.max_order + 1)
    for k in range(len(gm)):
        a[k] = gm[k] / math.factorial(k) / mw2
    a[0] += 1.0
    from .coupling_flow import series_log
    b = series_log(a)
    fact = np.array([math.factorial(k) for k in range(U.max_order + 1)], dtype=float)
    tower_inc = b * fact / params.beta
    step_inc = np.array([U1.coupling((0,) * k) for k in range(U.max_order + 1)]) - g
    diffs_tower = np.abs(step_inc - tower_inc)
    quad = []
    for p in range(1, m):
        inc = U1.coupling((-p, p)) - U.coupling((-p, p))
        expect = U.coupling((-p, p, -m, m)) / (mw2 + U.coupling((-m, m))) / params.beta
        quad.append(abs(inc - expect))
    return {"tower": float(diffs_tower.max()), "quadratic": float(max(quad, default=0.0))}


def warn_if_small_beta(U: GeneralizedPotential, params: FlowParams):
    """Warn when beta times the largest quartic coupling is not large."""
    g4 = max((abs(v) for k, v in U.poly.items() if len(k) == 4), default=0.0)
    if g4 and params.beta * g4 < 10:
        warnings.warn("beta is not large against the quartic couplings; dropped O(1/beta**2) "
                      "terms may matter", RuntimeWarning, stacklevel=2)
