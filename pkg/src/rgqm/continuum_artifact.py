"""Non-analytic momentum dependence produced by a sharp continuum shell.

Integrating the shell [k - dk/2, k + dk/2] (and its mirror) with a cubic
vertex generates a quadratic term F(q) x_q x_{-q} from pairs of shell momenta
p, p' with p + p' = -+q. The delta constraints deform the integration domain:
for |q| < dk the pair (p, -p -+ q) stays inside the shell only on an interval
of length dk - |q|, so F(q) is piecewise linear with a kink at |q| = dk. On a
lattice the same calculation integrates one mode at a time, and momentum
conservation forbids any such term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import FlowParams
from .coupling_flow import CouplingTable
from .errors import QuadratureNonConvergence
from .generalized_flow import GeneralizedPotential, brute_force_couplings, generalized_potential_step


@dataclass(frozen=True)
class ShellSpec:
    k: float
    delta_k: float
    q: float = 0.0
    U2: float = 1.0
    U3: float = 1.0
    U4: float = 0.0
    Z: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        if not (self.k > 0 and self.delta_k > 0):
            raise ValueError("k and delta_k must be positive")
        if not self.delta_k < self.k:
            raise ValueError("delta_k must be smaller than k")
        lo = self.k - self.delta_k / 2
        if min(self.G(lo), self.G(self.k + self.delta_k / 2)) <= 0:
            raise ValueError("G(p) must be positive on the shell")

    def G(self, p):
        """Inverse propagator Z p**2 + U2."""
        return self.Z * p * p + self.U2

    def with_q(self, q: float) -> "ShellSpec":
        return ShellSpec(self.k, self.delta_k, q, self.U2, self.U3, self.U4, self.Z, self.M)


def f_q_analytic(s: ShellSpec) -> float:
    """Leading form U3**2 (dk - |q|)/(2 G(k)**2), zero for |q| >= dk."""
    aq = abs(s.q)
    if aq >= s.delta_k:
        return 0.0
    return s.U3 ** 2 * (s.delta_k - aq) / (2.0 * s.G(s.k) ** 2)


def _pair_integral(s: ShellSpec, q: float) -> float:
    """int dp 1/(G(p) G(-p - q)), p in the upper shell and -p - q in its mirror."""
    half = s.delta_k / 2
    plo = max(s.k - half, s.k - half - q)
    phi = min(s.k + half, s.k + half - q)
    if phi <= plo:
        return 0.0
    val, err = quad(lambda p: 1.0 / (s.G(p) * s.G(-p - q)), plo, phi,
                    epsabs=0.0, epsrel=1e-12, limit=200)
    if err > 1e-8 * max(abs(val), 1e-300):
        raise QuadratureNonConvergence(f"shell integral error {err:.2e}", err)
    return val


def f_q_shell_quadrature(s: ShellSpec) -> float:
    """(U3**2/4) [I(q) + I(-q)] with the delta constraints resolved.

    p runs over the upper shell and its partner p' = -p -+ q over the lower
    one; the two delta terms are each other's conjugate, so together they
    make up the h.c. pair. Returns exactly 0 when |q| >= dk.
    """
    if abs(s.q) >= s.delta_k:
        return 0.0
    return 0.25 * s.U3 ** 2 * (_pair_integral(s, s.q) + _pair_integral(s, -s.q))


def kink_jump(s: ShellSpec, h: float | None = None) -> float:
    """One-sided slope change of f_q_shell_quadrature at |q| = dk."""
    h = s.delta_k * 1e-3 if h is None else h
    dk = s.delta_k
    left = (f_q_shell_quadrature(s.with_q(dk - h)) - f_q_shell_quadrature(s.with_q(dk - 2 * h))) / h
    right = (f_q_shell_quadrature(s.with_q(dk + 2 * h)) - f_q_shell_quadrature(s.with_q(dk + h))) / h
    return right - left


def f_q_discrete(params: FlowParams, q_index: int, m: int, u3: float = 1.0, u2: float = 1.0,
                 oracle: bool = False) -> float:
    """Coefficient of u_q u_{-q} generated by integrating mode m exactly.

    The probe table carries a quadratic coupling u2 and a cubic coupling u3 on
    every momentum-conserving tuple and nothing above cubic order, so the
    only quadratic contribution can come from a cubic vertex pairing q with
    the integrated mode. Returns the change of g^{q,-q} from the series step
    or, with oracle=True, from direct quadrature.
    """
    if not 0 < q_index < m:
        raise ValueError("need 0 < q_index < m")
    U = GeneralizedPotential.from_table(CouplingTable.from_local([0.0, 0.0, u2, u3, 0.0], m, 4))
    before = U.coupling((-q_index, q_index))
    if oracle:
        idx = [-q_index, q_index]
        bf = brute_force_couplings(U, m, params, indices=idx, fast_order=2)
        return float(bf.get((-q_index, q_index), 0.0) - before)
    U1 = generalized_potential_step(U, m, params)
    return float(U1.coupling((-q_index, q_index)) - before)


def fq_table(s: ShellSpec, qs) -> list[tuple]:
    """Rows (q, F_analytic, F_quadrature) for the reporting CSV."""
    rows = []
    for q in qs:
        sq = s.with_q(float(q))
        rows.append((float(q), f_q_analytic(sq), f_q_shell_quadrature(sq)))
    return rows
