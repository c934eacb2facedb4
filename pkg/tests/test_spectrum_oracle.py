import numpy as np
import pytest

from rgqm.errors import NonConvergence
from rgqm.models import AnharmonicSpec, SpectrumResult
from rgqm.spectrum_oracle import diag_grid, diag_hermite

# V = x**2/2 + lam x**4/24, M = hbar = 1; frozen from a 400-state basis. An
# 8th-order grid at 4000 points agrees to 3e-11
FROZEN = {0.1: (0.5030808640795, 1.0122026327728),
          1.0: (0.5277361273141, 1.1035644054547),
          10.0: (0.6735466880131, 1.5621887205852)}


def test_harmonic_exact():
    r = diag_hermite(AnharmonicSpec(1.0, 1.0, 0.0), 60)
    assert r.E0 == pytest.approx(0.5, abs=1e-10) and r.E1 == pytest.approx(1.5, abs=1e-10)
    g = diag_grid(AnharmonicSpec(1.0, 1.0, 0.0), n_points=2000)
    assert abs(g.E0 - 0.5) < 1e-6


def test_mass_and_frequency_scaling():
    r = diag_hermite(AnharmonicSpec(2.0, 3.0, 0.0), 60)
    assert r.E0 == pytest.approx(1.5, abs=1e-10) and r.gap == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("lam", sorted(FROZEN))
def test_frozen_anharmonic_levels(lam):
    e0, gap = FROZEN[lam]
    r = diag_hermite(AnharmonicSpec(1.0, 1.0, lam), 200)
    assert r.E0 == pytest.approx(e0, abs=1e-10) and r.gap == pytest.approx(gap, abs=1e-10)


def test_cross_oracle_agreement():
    spec = AnharmonicSpec(1.0, 1.0, 1.0)
    h = diag_hermite(spec, 200)
    g = diag_grid(spec, (-10, 10), 4000)
    tol = max(1e-8, h.convergence_estimate, g.convergence_estimate)
    assert abs(h.E0 - g.E0) < tol and abs(h.E1 - g.E1) < tol


def test_pure_quartic_stable():
    c = [0, 0, 0, 0, 1 / 24]
    a = diag_hermite(c, 200)
    b = diag_hermite(c, 400)
    assert a.E0 > 0 and abs(a.E0 - b.E0) < 1e-8


def test_variational_monotonicity():
    c = [0, 0, 0.5, 0, 1 / 24]
    e = [diag_hermite(c, n).E0 for n in (10, 14, 20, 30, 44, 64)]
    assert all(b <= a + 1e-13 for a, b in zip(e, e[1:]))


def test_basis_frequency_independence():
    c = [0, 0, 0.5, 0, 1 / 24]
    a = diag_hermite(c, 300, basis_frequency=1.0)
    b = diag_hermite(c, 300, basis_frequency=2.0)
    assert abs(a.E0 - b.E0) < 1e-8


def test_double_well_ordering():
    c = [0.25, 0, -0.5, 0, 0.25]         # (x**2 - 1)**2 / 4
    h = diag_hermite(c, 300, basis_frequency=1.5)
    g = diag_grid(c, (-8, 8), 3000)
    assert 0 < h.gap < 1 and h.E1 > h.E0
    assert abs(h.E0 - g.E0) < 1e-7


def test_nonconvergence_and_validation():
    with pytest.raises(NonConvergence):
        diag_hermite([0, 0, 0, 0, 1.0], 12, tol=1e-12)
    with pytest.raises(NonConvergence):
        diag_grid([0, 0, 0.5], n_points=200, order=2, tol=1e-12)
    with pytest.raises(ValueError):
        diag_hermite([0, 0, 0.5], 5)
    with pytest.raises(ValueError):
        SpectrumResult(1.0, 0.5, -0.5, 10, 0.0)
