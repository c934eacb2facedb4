"""The nine acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line (also collected into the pytest terminal
summary) and then asserts the criterion. Running this file directly prints the
nine lines without pytest.
"""

import math
import time

import numpy as np

from rgqm.continuum_artifact import (ShellSpec, f_q_analytic, f_q_discrete, f_q_shell_quadrature,
                                     kink_jump)
from rgqm.core import (FlowParams, free_particle_density, free_particle_lattice_exact,
                       measure_norm)
from rgqm.coupling_flow import run_family_flow
from rgqm.generalized_flow import (GeneralizedPotential, brute_force_couplings, consistency_check,
                                   generalized_potential_step, inconsistency_gap,
                                   inconsistency_gap_closed_form)
from rgqm.kinetic_flow import (KineticFunction, brute_force_z_increment, run_continuum_coupled,
                               run_kinetic_flow, z_step_constant_background, z_step_general)
from rgqm.lpa_flow import PotentialGrid, ground_state_energy, run_continuum_lpa, run_lpa_flow, zero_mode_energy
from rgqm.models import AnharmonicSpec
from rgqm.seed_check import seed_check
from rgqm.spectrum_oracle import diag_hermite

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:          # run as a script
    ACCEPTANCE_LINES = []


def report(n, passed, detail):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def harmonic_grid():
    return PotentialGrid.from_function(lambda x: 0.5 * x ** 2, -4.0, 4.0, 41)


def criterion_1():
    p = FlowParams.from_beta(4096, 60.0)
    t = time.perf_counter()
    v0, _ = run_lpa_flow(harmonic_grid(), p)
    t_lpa = time.perf_counter() - t
    e_raw = ground_state_energy(v0).energy
    e_zm = zero_mode_energy(v0, p)
    t = time.perf_counter()
    vc = run_continuum_lpa(harmonic_grid(), 1.0, 200.0, 200.0 / 2 ** 20, p)
    t_cont = time.perf_counter() - t
    e_cont = float(vc.values.min())
    ok_lpa = abs(e_raw - 0.5) <= 2e-3 and t_lpa < 10
    ok_cont = abs(e_cont - 0.5) <= 1e-3 and t_cont < 10
    detail = (f"LPA V0(0)={e_raw:.6f} (|err| {abs(e_raw - 0.5):.2e}, tol 2e-3, {t_lpa:.1f}s) "
              f"[with zero-mode integral {e_zm:.6f}]; continuum {e_cont:.6f} "
              f"(|err| {abs(e_cont - 0.5):.2e}, tol 1e-3, {t_cont:.1f}s)")
    return report(1, ok_lpa and ok_cont, detail)


def criterion_2():
    r = run_family_flow(AnharmonicSpec(1.0, 1.0, 0.0), 8, FlowParams.from_beta(4096, 60.0))
    return report(2, abs(r.gap - 1.0) <= 1e-12, f"gap={r.gap!r}")


def criterion_3():
    p = FlowParams.from_beta(4096, 60.0)
    t = time.perf_counter()
    ok = True
    parts = []
    for lam in (0.1, 1.0, 10.0):
        spec = AnharmonicSpec(1.0, 1.0, lam)
        r = run_family_flow(spec, 8, p)
        e = diag_hermite(spec, 200)
        de = r.E0 / e.E0 - 1
        dg = r.gap / e.gap - 1
        dz = r.metadata["E0_zero_mode"] / e.E0 - 1
        ok &= abs(de) <= 5e-3 and abs(dg) <= 5e-3
        parts.append(f"lam={lam:g}: dE0={de:+.2e} dgap={dg:+.2e} [dE0 with zero mode {dz:+.2e}]")
    elapsed = time.perf_counter() - t
    ok &= elapsed < 30
    return report(3, ok, "; ".join(parts) + f"; {elapsed:.1f}s (tol 5e-3)")


def criterion_4():
    rng = np.random.default_rng(20240604)
    p = FlowParams.from_beta(16, 4.0)
    worst = 0.0
    for _ in range(20):
        coeffs = [0.0, 0.0, rng.uniform(0.2, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0)]
        m = int(rng.integers(1, 9))
        x0 = float(rng.uniform(-0.5, 0.5))
        worst = max(worst, abs(inconsistency_gap(coeffs, m, p, x0)
                               - inconsistency_gap_closed_form(coeffs, m, p, x0)))
    return report(4, worst <= 1e-10, f"max |measured - closed form| = {worst:.2e} (tol 1e-10)")


def criterion_5():
    worst_bf = 0.0
    worst_cons = 0.0
    n_coup = 0
    for n, m, idx in [(4, 2, None), (8, 4, [-1, 0, 1]), (16, 8, [-2, 0, 2])]:
        p = FlowParams.from_beta(n, 3.0)
        U = GeneralizedPotential.from_local([0.0, 0.0, 1.3, 0.0, 0.5, 0.0, 0.4], m, 6)
        U1 = generalized_potential_step(U, m, p)
        bf = brute_force_couplings(U, m, p, indices=idx)
        n_coup += len(bf)
        worst_bf = max(worst_bf, max(abs(v - U1.coupling(k)) for k, v in bf.items()))
        c = consistency_check(U, m, p)
        worst_cons = max(worst_cons, c["tower"], c["quadratic"])
    ok = worst_bf <= 1e-6 and worst_cons <= 1e-8
    return report(5, ok, f"step vs quadrature max {worst_bf:.2e} over {n_coup} couplings (tol 1e-6); "
                         f"constant-background consistency {worst_cons:.2e} (tol 1e-8)")


def criterion_6():
    # (a) constant Z is bitwise invariant everywhere
    p = FlowParams.from_beta(64, 10.0)
    grid = PotentialGrid.from_function(lambda x: 0.5 * x ** 2 + x ** 4 / 24, -4, 4, 41)
    z0 = np.full(41, 1.3)
    _, z, _ = run_kinetic_flow(grid, z0, p)
    _, zc = run_continuum_coupled(grid, 1.3, 20.0, 20.0 / 2 ** 12, p)
    zs, _ = z_step_constant_background(z0, np.zeros(41), grid.values, np.ones(41), 5, p)
    U = GeneralizedPotential.from_local([0.0, 0.0, 1.0, 0.0, 0.5], 3, 4)
    zg = z_step_general(KineticFunction.constant(1.3), U, 0, 3, FlowParams.from_beta(8, 2.0), {0: 0.4})
    bitwise = (np.array_equal(z, z0) and np.array_equal(zc, z0) and np.array_equal(zs, z0)
               and zg.value == 0.0)
    # (b) Z = 1 + 0.1 x**2 against the two-mode quadrature oracle
    pz = FlowParams.from_beta(8, 2.0)
    Z = KineticFunction((1.0, 0.0, 0.1))
    worst = 0.0
    ratios = []
    for m, x0 in [(2, 0.0), (3, 0.3), (4, -0.5)]:
        v2 = 1.0 + 0.5 * x0 ** 2
        znew, _ = z_step_constant_background(Z.value(x0), Z.value(x0, 2), 0.0, v2, m, pz)
        flow = znew - Z.value(x0)
        oracle = brute_force_z_increment(Z, [0.0, 0.0, 0.5, 0.0, 1 / 24], x0, m, pz)
        worst = max(worst, abs(flow - oracle))
        ratios.append(oracle / flow)
    ok = bitwise and worst <= 1e-6
    return report(6, ok, f"constant Z bitwise invariant: {bitwise}; Z=1+0.1x^2 flow vs oracle "
                         f"max |diff| {worst:.2e} (tol 1e-6), oracle/flow ratios "
                         + ", ".join(f"{r:.6f}" for r in ratios))


def criterion_7():
    t = time.perf_counter()
    s = ShellSpec(k=1.0, delta_k=1e-3, U2=1.0, U3=1.0)
    f0 = f_q_analytic(s)
    worst = 0.0
    for q in np.linspace(0.0, 0.99e-3, 34):
        sq = s.with_q(float(q))
        worst = max(worst, abs(f_q_shell_quadrature(sq) - f_q_analytic(sq)) / f0)
    jump = kink_jump(s)
    expect = s.U3 ** 2 / (2 * s.G(s.k) ** 2)
    kink_ok = abs(jump / expect - 1) < 0.05
    disc = 0.0
    n_probe = 0
    for n in (4, 8, 16):
        p = FlowParams.from_beta(n, 5.0)
        for m in range(2, n // 2 + 1):
            for q in range(1, m):
                for u3 in (0.0, 0.5, 2.0):
                    disc = max(disc, abs(f_q_discrete(p, q, m, u3=u3)))
                    n_probe += 1
    disc = max(disc, abs(f_q_discrete(FlowParams.from_beta(4, 5.0), 1, 2, u3=1.5, oracle=True)))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-3 and kink_ok and disc <= 1e-10 and elapsed < 5
    return report(7, ok, f"profile max rel err {worst:.2e} (tol 1e-3); kink {jump:.6f} vs {expect:.6f}; "
                         f"discrete max |F| {disc:.1e} over {n_probe + 1} probes; {elapsed:.1f}s")


def criterion_8():
    worst = 0.0
    lines = []
    for n in (2, 4, 8, 64):
        p = FlowParams(n, 0.5)
        worst = max(worst, abs(free_particle_density(p) / free_particle_lattice_exact(p) - 1))
        pp = FlowParams(n, 0.5, freq_convention="paper")
        lines.append(f"N={n}: laplacian prod={measure_norm(p):.6g} (N+1={n + 1}), "
                     f"paper prod={measure_norm(pp):.6g} (sqrt(N+1)={math.sqrt(n + 1):.6g}), "
                     f"paper Z/exact={free_particle_density(pp) / free_particle_lattice_exact(p):.6g}")
    for line in lines:
        print("  " + line)
    return report(8, worst <= 1e-10, f"laplacian max rel err {worst:.2e} (tol 1e-10); "
                                     f"{lines[1]}")


def criterion_9():
    r = seed_check()
    alt = r["alternatives"]
    return report(9, r["passed"], f"{r['n_checks']} coefficients, max |formula - oracle| "
                                  f"{r['max_abs_error']:.2e} (tol 1e-6); tree term without 1/beta "
                                  f"confirmed, 1/beta variant off by "
                                  f"{alt['tree_over_beta_max_error']:.2e}; weight-1 triple term off by "
                                  f"{alt['triple_weight_one_max_error']:.2e}")


def test_criterion_1_harmonic_ground_state():
    assert criterion_1()


def test_criterion_2_harmonic_gap():
    assert criterion_2()


def test_criterion_3_anharmonic_cross_validation():
    assert criterion_3()


def test_criterion_4_inconsistency_gap():
    assert criterion_4()


def test_criterion_5_generalized_closure():
    assert criterion_5()


def test_criterion_6_kinetic_invariance():
    assert criterion_6()


def test_criterion_7_sharp_cutoff_artifact():
    assert criterion_7()


def test_criterion_8_measure_convention():
    assert criterion_8()


def test_criterion_9_permutation_counts():
    assert criterion_9()


if __name__ == "__main__":
    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
               criterion_7, criterion_8, criterion_9):
        fn()
