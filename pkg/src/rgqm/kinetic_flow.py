"""Flow of a position-dependent kinetic coefficient Z(x).

The kinetic part of S/(hbar beta) in mode variables is

    K = 1/2 sum_{i,j} (-omega_i omega_j) u_i u_j Zhat_{-(i+j)}

where omega_{-n} = -omega_n and Zhat_k is the momentum-k Fourier coefficient
of Z(x0 + dx(t)). Mode derivatives act on the Fourier coefficients as
d Zhat_k/du_n = [Z']_{k-n}, with [f]_k the momentum-k coefficient of f(x(t)).
For constant Z the kinetic term is Z omega_p**2 u_p u_{-p} per mode pair.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import series
from .core import FlowParams, ModeVector, frequency_table
from .errors import ConvexityError
from .generalized_flow import GeneralizedPotential, brute_force_step, torus_taylor
from .lpa_flow import DELTA_LOG, PotentialGrid, _run_shells, second_derivatives

SOURCE_NOTE = "kinetic source-term contribution omitted"


def _signed_omegas(params: FlowParams, cutoff: int) -> dict:
    w2 = frequency_table(params).omega_sq
    out = {0: 0.0}
    for n in range(1, cutoff + 1):
        w = math.sqrt(w2[n])
        out[n] = w
        out[-n] = -w
    return out


@dataclass(frozen=True)
class KineticFunction:
    """Z(x) = sum_k coeffs[k] x**k, a real polynomial.

    Fourier data are exact polynomials in the mode variables: with
    x(t) = u_0 + sum_{n != 0} u_n e^{i theta n t}, the coefficient of a
    monomial u_{n_1}..u_{n_p} in Z(x(t)) is Z^(p)(0)/prod(multiplicity!).
    """

    coeffs: tuple = (1.0,)

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.coeffs))
        if not c:
            raise ValueError("need at least one coefficient")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, z: float) -> "KineticFunction":
        return cls((float(z),))

    @property
    def is_constant(self) -> bool:
        return all(v == 0.0 for v in self.coeffs[1:])

    def value(self, x, deriv: int = 0):
        pd = np.polynomial.polynomial
        c = np.array(self.coeffs)
        if deriv:
            c = pd.polyder(c, deriv) if len(c) > deriv else np.zeros(1)
        return pd.polyval(x, c)

    def mode_poly(self, cutoff: int, deriv: int = 0) -> dict:
        """[Z^(deriv)] as a polynomial in u_n, |n| <= cutoff, every momentum."""
        c = np.array(self.coeffs)
        if deriv:
            c = np.polynomial.polynomial.polyder(c, deriv) if len(c) > deriv else np.zeros(1)
        idx = range(-cutoff, cutoff + 1)
        out = {}
        for p, cp in enumerate(c):
            if cp == 0.0:
                continue
            dp = cp * math.factorial(p)
            for key in itertools.combinations_with_replacement(idx, p):
                out[key] = dp / series.multiplicity_factorial(key)
        return out

    def fourier(self, k: int, u: dict, deriv: int = 0, cutoff: int | None = None):
        """[Z^(deriv)]_k at mode values u (indices absent from u are zero)."""
        cutoff = max((abs(n) for n in u), default=0) if cutoff is None else cutoff
        poly = {key: v for key, v in self.mode_poly(cutoff, deriv).items()
                if sum(key) == k and all(n in u for n in key)}
        return series.evaluate(poly, u)

    def mass(self, u: dict):
        """M_m = Zhat_0 at the background."""
        return self.fourier(0, u)

    def derivative(self, k: int, indices, u: dict):
        """d^p Zhat_k/du_{n_1}..du_{n_p} = [Z^(p)]_{k - sum n}."""
        return self.fourier(k - sum(indices), u, deriv=len(indices))

    def symmetry_residuals(self, m: int, u: dict, ks=None) -> dict:
        """Conjugation and reality relations of the Fourier derivatives.

        For a real path (u_{-n} = conj u_n) the following hold exactly:
        (1) Z_k^(m) = conj Z_{-k}^(-m), (2) Zhat_0 is real,
        (3) Z_k^(m,m) = conj Z_{-k}^(-m,-m).
        """
        ks = range(-2 * m, 2 * m + 1) if ks is None else ks
        r1 = max(abs(self.derivative(k, (m,), u) - np.conj(self.derivative(-k, (-m,), u))) for k in ks)
        r2 = abs(np.imag(self.mass(u)))
        r3 = max(abs(self.derivative(k, (m, m), u) - np.conj(self.derivative(-k, (-m, -m), u)))
                 for k in ks)
        return {"conjugate_first": float(r1), "real_mass": float(r2), "conjugate_second": float(r3)}


def kinetic_poly(Z: KineticFunction, cutoff: int, omegas: dict) -> dict:
    """K as a polynomial in u_n, |n| <= cutoff, for signed frequencies omegas[n]."""
    zp = Z.mode_poly(cutoff)
    by_mom = {}
    for key, v in zp.items():
        by_mom.setdefault(sum(key), {})[key] = v
    out = {}
    idx = [n for n in range(-cutoff, cutoff + 1) if n != 0]
    for i in idx:
        for j in idx:
            f = by_mom.get(-(i + j))
            if not f:
                continue
            c = -0.5 * omegas[i] * omegas[j]
            for key, v in f.items():
                kk = tuple(sorted(key + (i, j)))
                out[kk] = out.get(kk, 0.0) + c * v
    return out


@dataclass(frozen=True)
class ABCForms:
    """Quadratic-form data of the fast pair including kinetic cross terms."""

    A: float
    B: complex
    C: complex


def _bg_dict(background: ModeVector | dict, params: FlowParams) -> dict:
    if isinstance(background, ModeVector):
        return background.normalized(params)
    return dict(background)


def assemble_ABC(U: GeneralizedPotential, Z: KineticFunction, background, m: int,
                 params: FlowParams) -> ABCForms:
    """A, B, C from U derivatives plus the kinetic Fourier sums.

    A = U^(m,-m) + 1/2 sum_{ij} (-w_i w_j) u_i u_j [Z'']_{-(i+j)}
    B = U^(m,m) - w_m**2 Zhat_{-2m} + 2 sum_j (-w_m w_j) u_j [Z']_{-2m-j}
        + 1/2 sum_{ij} (-w_i w_j) u_i u_j [Z'']_{-(i+j)-2m}
    C = U^(m) + sum_j (-w_m w_j) u_j Zhat_{-m-j} + 1/2 sum_{ij} (-w_i w_j) u_i u_j [Z']_{-(i+j)-m}

    with i, j running over background indices other than 0 and +-m.
    """
    u = _bg_dict(background, params)
    if any(abs(n) >= m for n, v in u.items() if np.any(np.asarray(v) != 0)):
        raise ValueError("background modes must lie below m")
    cut = max(max((abs(n) for n in u), default=0), 1)
    w = _signed_omegas(params, m)
    ub = dict(u)
    ub[m] = 0.0
    ub[-m] = 0.0
    idx = [n for n in u if n != 0 and abs(n) < m]

    def zf(k, deriv=0):
        return Z.fourier(k, u, deriv, cutoff=cut)

    a = 0.0
    b = -w[m] ** 2 * zf(-2 * m)
    c = 0.0
    for j in idx:
        b += 2.0 * (-w[m] * w[j]) * u[j] * zf(-2 * m - j, 1)
        c += (-w[m] * w[j]) * u[j] * zf(-m - j)
        for i in idx:
            f = 0.5 * (-w[i] * w[j]) * u[i] * u[j]
            a += f * zf(-(i + j), 2)
            b += f * zf(-(i + j) - 2 * m, 2)
            c += f * zf(-(i + j) - m, 1)
    a = complex(a + U.derivative((m, -m), ub)).real
    b = complex(b + U.derivative((m, m), ub))
    c = complex(c + U.derivative((m,), ub))
    return ABCForms(a, b, c)


def action_step_with_Z(s_m: float, forms: ABCForms, mass_m: float, m: int, params: FlowParams,
                       delta_log: float = DELTA_LOG) -> float:
    """S_{m-1} in units of hbar*beta (potential units).

    S_m + (1/2beta) log[((M_m w**2 + A)**2 - |B|**2)/(M_m w**2)**2]
        - [(M_m w**2 + A)|C|**2 - Re(conj(B) C**2)]/[(M_m w**2 + A)**2 - |B|**2]
    """
    mw2 = mass_m * float(frequency_table(params).omega_sq[m])
    p = mw2 + forms.A
    g = p * p - abs(forms.B) ** 2
    if not g / mw2 ** 2 > delta_log or p <= 0:
        raise ConvexityError(m, value=g / mw2 ** 2)
    src = (p * abs(forms.C) ** 2 - (np.conj(forms.B) * forms.C ** 2).real) / g
    return s_m + 0.5 * math.log(g / mw2 ** 2) / params.beta - src


def z_step_constant_background(z, z_mm, u, u_mm, m: int, params: FlowParams,
                               delta_log: float = DELTA_LOG):
    """(Z_{m-1}(x0), U_{m-1}(x0)) at constant background.

    z, z_mm: Z(x0) and Z^(m,-m)(x0); u, u_mm: U(x0) and U^(m,-m)(x0).
    Works elementwise on arrays. Z is left bitwise unchanged when z_mm == 0.
    """
    w2 = float(frequency_table(params).omega_sq[m])
    z = np.asarray(z, dtype=float)
    den = z * w2 + u_mm
    arg = 1.0 + np.asarray(u_mm, dtype=float) / (z * w2)
    bad = (arg <= delta_log) | (den <= delta_log)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ConvexityError(m, value=float(np.ravel(arg)[i]))
    dz = np.where(np.asarray(z_mm) == 0.0, 0.0, 0.5 * np.asarray(z_mm, dtype=float) / den / params.beta)
    znew = z + dz
    unew = u + np.log(arg) / params.beta
    if znew.ndim == 0:
        return float(znew), float(unew)
    return znew, unew


@dataclass
class ZIncrement:
    value: complex
    metadata: dict = field(default_factory=lambda: {"source_term": SOURCE_NOTE})


def z_step_general(Z: KineticFunction, U: GeneralizedPotential, target: int, m: int,
                   params: FlowParams, background=None, delta_log: float = DELTA_LOG) -> ZIncrement:
    """Increment of the Fourier coefficient Zhat_{-target} from one mode.

    (1/2beta)[P [Z'']_{-s} - ([Z'']_{-s-2m} conj(B) + B [Z'']_{-s+2m})/2]/G,
    s = target, P = M_m w**2 + A, G = P**2 - |B|**2. The source-term part is
    not included; the metadata says so.
    """
    bg = _bg_dict(background if background is not None else {0: 0.0}, params)
    forms = assemble_ABC(U, Z, bg, m, params)
    cut = max(max((abs(n) for n in bg), default=0), 1)
    mass = Z.mass(bg).real
    w2 = float(frequency_table(params).omega_sq[m])
    p = mass * w2 + forms.A
    g = p * p - abs(forms.B) ** 2
    if not g / (mass * w2) ** 2 > delta_log or p <= 0:
        raise ConvexityError(m, value=g / (mass * w2) ** 2)
    s = target

    def z2(k):
        return Z.fourier(k, bg, deriv=2, cutoff=cut)

    if Z.is_constant:
        return ZIncrement(0.0)
    val = (p * z2(-s) - 0.5 * (z2(-s - 2 * m) * np.conj(forms.B) + forms.B * z2(-s + 2 * m))) / g
    return ZIncrement(complex(val) * 0.5 / params.beta)


def run_kinetic_flow(U0: PotentialGrid, Z0, params: FlowParams, delta_log: float = DELTA_LOG):
    """Mode-by-mode constant-background flow of (U, Z) on a grid.

    Z''(x0) and U''(x0) stand for the mode derivatives Z^(m,-m), U^(m,-m).
    Returns the final (PotentialGrid, Z array) and per-mode rows
    (m, U at x=0, Z at x=0).
    """
    z = np.array(Z0, dtype=float)
    if np.any(z <= 0):
        raise ValueError("kinetic coefficient must be positive on the grid")
    zg = U0.with_values(z)
    grid = U0
    rows = []
    i0 = int(np.argmin(np.abs(U0.x)))
    for m in range(params.n_modes, 0, -1):
        u2 = second_derivatives(grid)
        z2 = second_derivatives(zg) if np.any(z != z[0]) else np.zeros_like(z)
        try:
            z, u = z_step_constant_background(z, z2, grid.values, u2, m, params, delta_log)
        except ConvexityError as err:
            err.trace = rows
            raise
        grid = grid.with_values(u)
        zg = zg.with_values(z)
        rows.append((m, float(u[i0]), float(z[i0])))
    return grid, z, rows


def run_continuum_coupled(U0: PotentialGrid, Z0, Lambda: float, delta_k: float, params: FlowParams,
                          shell_point: str = "mid", delta_log: float = DELTA_LOG):
    """Coupled shell recursion for (U_k, Z_k), U updated first in each shell.

    U_{k-dk} = U_k + (hbar dk/2pi) log(1 + U_k''/(Z_k k**2))
    Z_{k-dk} = Z_k + (hbar dk/4pi) Z_k''/(Z_k k**2 + U_{k-dk}'')
    """
    z = np.broadcast_to(np.asarray(Z0, dtype=float), (U0.n_points,)).copy()
    flow_z = bool(np.any(z != z[0]))
    u, z = _run_shells(U0, z, Lambda, delta_k, params, shell_point, flow_z, delta_log)
    return U0.with_values(u), z


# --- quadrature oracle ----------------------------------------------------------

def brute_force_z_increment(Z: KineticFunction, v_coeffs, x0: float, m: int, params: FlowParams,
                            q: int = 1, probe_omega: float | None = None, radius: float = 0.2,
                            n_torus: int = 8, **quad) -> float:
    """Change of the coefficient of omega_q**2 u_q u_{-q} after integrating mode m.

    The action beta[K + V] is built on modes {0, +-q, +-m} with omega_q as a
    free parameter; mode m is integrated numerically (one-loop model) and the
    u_q u_{-q} coefficient is read off a torus at omega_q = probe_omega and at
    omega_q = 0. The difference divided by omega_q**2, minus Z(x0), is the
    increment of Z at x0.
    """
    if not 0 < q < m:
        raise ValueError("need 0 < q < m")
    w = _signed_omegas(params, m)
    probe_omega = abs(w[q]) if probe_omega is None else probe_omega
    from .models import taylor_derivatives
    deg = max(len(v_coeffs) - 1, len(Z.coeffs) + 1, 4)
    vloc = GeneralizedPotential.from_local(taylor_derivatives(v_coeffs, deg), m, deg).poly
    keep = {0, q, -q, m, -m}
    vloc = {k: v for k, v in vloc.items() if set(k) <= keep}

    def coefficient(wq):
        om = {0: 0.0, q: wq, -q: -wq, m: w[m], -m: w[-m]}
        for n in range(1, m + 1):
            om.setdefault(n, 0.0)
            om.setdefault(-n, 0.0)
        kp = {k: v for k, v in kinetic_poly(Z, m, om).items() if set(k) <= keep}
        total = series.add(kp, vloc)

        def action(u):
            return params.beta * series.evaluate({k: v for k, v in total.items() if all(n in u for n in k)}, u)

        def s_prev(u):
            bg = dict(u)
            size = next(iter(bg.values())).shape[0]
            bg[0] = np.full(size, complex(x0))
            return brute_force_step(action, m, params, bg, fast_order=2, **quad)

        co = torus_taylor(s_prev, [q, -q], radius, n_torus, 2)
        return co[(-q, q)].real / params.beta

    c1 = coefficient(probe_omega)
    c0 = coefficient(0.0)
    return (c1 - c0) / probe_omega ** 2 - float(Z.value(x0))
