import math

import pytest
from hypothesis import given, settings, strategies as st

from rgqm.continuum_artifact import (ShellSpec, f_q_analytic, f_q_discrete, f_q_shell_quadrature,
                                     fq_table, kink_jump)
from rgqm.core import FlowParams

S = ShellSpec(k=1.0, delta_k=1e-3, U2=1.0, U3=1.3)


def test_shell_validation():
    with pytest.raises(ValueError):
        ShellSpec(1.0, 2.0)
    with pytest.raises(ValueError):
        ShellSpec(1.0, 0.1, U2=-5.0)


def test_analytic_examples():
    g = S.G(S.k)
    f0 = f_q_analytic(S)
    assert f0 == pytest.approx(1.3 ** 2 * 1e-3 / (2 * g * g))
    assert f_q_analytic(S.with_q(S.delta_k / 2)) == pytest.approx(f0 / 2)
    assert f_q_analytic(S.with_q(S.delta_k)) == 0.0
    assert f_q_analytic(S.with_q(5.0)) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.999))
def test_quadrature_vs_analytic(frac):
    s = S.with_q(frac * S.delta_k)
    a = f_q_analytic(s)
    b = f_q_shell_quadrature(s)
    assert b == pytest.approx(a, rel=1e-3, abs=1e-3 * f_q_analytic(S))
    assert f_q_shell_quadrature(s.with_q(-s.q)) == pytest.approx(b, rel=1e-12)


def test_outside_domain_is_zero():
    for q in (S.delta_k, 1.5 * S.delta_k, 0.3):
        assert f_q_shell_quadrature(S.with_q(q)) == 0.0


def test_kink():
    g = S.G(S.k)
    assert kink_jump(S) == pytest.approx(S.U3 ** 2 / (2 * g * g), rel=0.05)


def test_limit_small_shell():
    q = 2e-3
    vals = [f_q_shell_quadrature(ShellSpec(1.0, dk, q, U3=1.0)) for dk in (1e-2, 5e-3, 1e-3)]
    assert vals[0] > vals[1] > 0 and vals[2] == 0.0


def test_table_rows():
    rows = fq_table(S, [0.0, 5e-4, 2e-3])
    assert [r[0] for r in rows] == [0.0, 5e-4, 2e-3]
    assert rows[-1][1:] == (0.0, 0.0)


@pytest.mark.parametrize("n,m,q", [(4, 2, 1), (8, 3, 1), (8, 4, 2), (8, 4, 3)])
@pytest.mark.parametrize("u3", [0.0, 0.8, 2.5])
def test_discrete_nullity(n, m, q, u3):
    p = FlowParams.from_beta(n, 5.0)
    assert abs(f_q_discrete(p, q, m, u3=u3)) < 1e-10


def test_discrete_nullity_quadrature():
    p = FlowParams.from_beta(4, 5.0)
    assert abs(f_q_discrete(p, 1, 2, u3=1.5, oracle=True)) < 1e-10
    assert f_q_analytic(S) > 0     # the continuum shell gives a nonzero value


def test_discrete_bad_index():
    with pytest.raises(ValueError):
        f_q_discrete(FlowParams.from_beta(4, 5.0), 2, 2)
