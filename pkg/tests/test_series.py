import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rgqm import series


def test_mul_truncates():
    a = {(0,): 1.0, (): 2.0}
    b = {(0, 0): 1.0}
    assert series.mul(a, b, 2) == {(0, 0): 2.0}
    assert series.mul(a, b, 3) == {(0, 0): 2.0, (0, 0, 0): 1.0}


def test_derivative_multiplicity():
    a = {(-1, 1, 1): 3.0}
    assert series.derivative(a, 1) == {(-1, 1): 6.0}
    assert series.derivative(a, 2) == {}


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_log1p_matches_numeric(c1, c2, x):
    w = {(0,): c1, (0, 0): c2}
    poly = series.log1p(w, 14)
    approx = series.evaluate(poly, {0: x})
    exact = math.log1p(c1 * x + c2 * x * x)
    assert approx == pytest.approx(exact, abs=1e-7)


def test_inv1p():
    w = {(1,): 0.5}
    poly = series.inv1p(w, 6)
    assert series.evaluate(poly, {1: 0.2}) == pytest.approx(sum((-0.1) ** k for k in range(7)))


def test_power_series_needs_zero_constant():
    with pytest.raises(ValueError):
        series.log1p({(): 1.0}, 3)


def test_restrict_and_factorial():
    a = {(-2, 2): 1.0, (0, 0): 2.0}
    assert series.restrict(a, 1) == {(0, 0): 2.0}
    assert series.multiplicity_factorial((0, 0, 1, 1, 1)) == 12


def test_evaluate_arrays():
    a = {(0,): 2.0, (0, 0): 1.0}
    x = np.array([0.0, 1.0, 2.0])
    assert np.allclose(series.evaluate(a, {0: x}), 2 * x + x * x)
