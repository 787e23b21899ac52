import numpy as np
import pytest
from scipy import integrate

from tcvol._basis import QuasiPoly


def test_power_derivatives():
    q = QuasiPoly.power(2.5, 3.0)
    z = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(q(z, 1), 7.5 * z**1.5)
    np.testing.assert_allclose(q(z, 2), 11.25 * z**0.5)


def test_log_terms_differentiate():
    q = QuasiPoly.power(1.7, 2.0, 2)
    f = lambda z: 2.0 * z**1.7 * np.log(z) ** 2
    h = 1e-5
    for z in (0.7, 1.3, 4.0):
        fd = (f(z + h) - f(z - h)) / (2 * h)
        assert q(z, 1) == pytest.approx(fd, rel=1e-8)


def test_complex_exponent_is_trig():
    q = QuasiPoly.power(0.3 + 2j)
    s = QuasiPoly.power(0.3 + 2j, -1j)
    z = np.linspace(0.5, 3, 7)
    np.testing.assert_allclose(q(z), z**0.3 * np.cos(2 * np.log(z)), atol=1e-14)
    np.testing.assert_allclose(s(z), z**0.3 * np.sin(2 * np.log(z)), atol=1e-14)


def test_product_of_real_parts():
    a = QuasiPoly.power(0.2 + 1j, 1.5) + QuasiPoly.power(-1.1)
    b = QuasiPoly.power(0.4 - 0.5j, 0.3j, 1)
    z = np.linspace(0.4, 5, 11)
    np.testing.assert_allclose((a * b)(z), a(z) * b(z), rtol=1e-12, atol=1e-14)


def test_exact_integral_matches_quadrature():
    q = QuasiPoly.power(-1.0, 1.0) + QuasiPoly.power(0.5 + 3j, 2.0, 1) + QuasiPoly.power(2.0, 1.0, 2)
    ref = integrate.quad(lambda z: q(z), 0.8, 3.3, epsabs=0, epsrel=1e-13)[0]
    assert q.integrate(0.8, 3.3) == pytest.approx(ref, rel=1e-12)


def test_euler_operator():
    q = QuasiPoly.power(3.0)
    assert q.euler(2)(2.0) == pytest.approx(6.0 * 8.0)


def test_nonpositive_argument_rejected():
    with pytest.raises(ValueError):
        QuasiPoly.power(1.0)(0.0)
