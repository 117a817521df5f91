import math

import numpy as np
import pytest

from spectrakde.quadrature import GAUSS, KRONROD, NODES, QuadratureError, gk15, integrate


def test_rule_weights():
    assert KRONROD.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS.sum() == pytest.approx(2.0, abs=1e-15)
    # Gauss part is exact for degree 13, Kronrod for degree 22
    assert GAUSS @ NODES**12 == pytest.approx(2.0 / 13.0, abs=1e-15)
    assert KRONROD @ NODES**22 == pytest.approx(2.0 / 23.0, abs=1e-15)


def test_gk15_polynomial_exact():
    val, err = gk15(lambda x: x**6, np.array([0.0]), np.array([2.0]))
    assert val[0] == pytest.approx(2.0**7 / 7.0, rel=1e-14)
    assert err[0] <= 1e-12


@pytest.mark.parametrize("f, a, b, exact", [
    (np.exp, 0.0, 1.0, math.e - 1.0),
    (lambda x: 1.0 / (1.0 + x * x), -50.0, 50.0, 2.0 * math.atan(50.0)),
    (lambda x: np.sqrt(np.abs(x)), -1.0, 1.0, 4.0 / 3.0),
])
def test_integrate_real(f, a, b, exact):
    val, err = integrate(f, a, b, atol=1e-11)
    assert abs(val - exact) <= 1e-9


def test_integrate_complex():
    z = 0.5 + 0.1j
    val, _ = integrate(lambda x: 1.0 / (x - z), 0.0, 1.0, atol=1e-11, pieces=8)
    assert abs(val - (np.log(1.0 - z) - np.log(-z))) <= 1e-9


def test_breakpoints_and_errors():
    val, _ = integrate(lambda x: np.where(x < 0.3, 1.0, 0.0), 0.0, 1.0, breakpoints=[0.3])
    assert val == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)
    with pytest.raises(QuadratureError):
        integrate(lambda x: 1.0 / np.abs(x - 0.3137), 0.0, 1.0, max_rounds=5)
