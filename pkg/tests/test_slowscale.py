import numpy as np
import pytest

from tcvol.constvol import solve_zeroth
from tcvol.exceptions import UnsupportedCaseError
from tcvol.model import MarketParams, constant_vol_model, ou_logistic_model, v1_slow
from tcvol.oracles import delta1_quadrature, finite_diff, ode_residual, slow_v1_operator
from tcvol.slowscale import (VegaBlock, boundary_corrections_slow, delta1_slow,
                             delta1_slow_closed, delta_prime, slow_correction,
                             slow_correction_at, v1_slow_coeffs, vega_block, vega_fd,
                             vega_function)

H = 1e-4  # relative finite-difference step in sigma


def fd_sigma(fn, params, sigma=0.2):
    return finite_diff(lambda s: fn(solve_zeroth(params, s)), sigma, H * sigma, richardson=True)


def test_delta_prime_matches_finite_difference(real_sol, real_params):
    fd = fd_sigma(lambda s: s.Delta0, real_params)
    assert delta_prime(real_sol) == pytest.approx(fd, rel=1e-6)
    assert delta_prime(real_sol) < 0


def test_delta_prime_negative_on_sweep():
    for mu in (0.04, 0.05, 0.06, 0.07):
        for sigma in (0.2, 0.25):
            assert delta_prime(solve_zeroth(MarketParams(mu=mu), sigma)) < 0


def test_delta_prime_merton_limit():
    s = solve_zeroth(MarketParams(mu=0.07, lam=1e-8), 0.2)
    assert delta_prime(s) == pytest.approx(-0.07**2 / (2 * 0.2**3), abs=1e-3)


@pytest.mark.parametrize("name,getter", [
    ("pi_dot_minus", lambda s: s.pi_minus),
    ("pi_dot_plus", lambda s: s.pi_plus),
    ("L0_dot", lambda s: s.L0),
    ("U0_dot", lambda s: s.U0),
    ("k_l_dot", lambda s: s.k_l),
    ("k_u_dot", lambda s: s.k_u),
    ("theta_dot_plus", lambda s: s.theta.theta_plus.real),
    ("theta_dot_minus", lambda s: s.theta.theta_minus.real),
    ("c_dot_plus", lambda s: s.c_plus),
    ("c_dot_minus", lambda s: s.c_minus),
])
def test_vega_block_fields(real_sol, real_params, name, getter):
    vb = vega_block(real_sol)
    assert getattr(vb, name) == pytest.approx(fd_sigma(getter, real_params), rel=1e-5)


def test_vega_identities(real_sol):
    vb = vega_block(real_sol)
    assert vb.L0_dot == pytest.approx((1 + real_sol.L0) ** 2 * vb.pi_dot_minus, rel=1e-15)
    with pytest.raises(UnsupportedCaseError):
        vega_block(solve_zeroth(MarketParams(mu=0.05), 0.2))


def test_vega_function(real_sol, real_params):
    vq = vega_function(real_sol, vega_block(real_sol))
    z = np.linspace(real_sol.L0, real_sol.U0, 20)
    fd = fd_sigma(lambda s: s.v0(z), real_params)
    np.testing.assert_allclose(vq(z), fd, rtol=1e-5)
    np.testing.assert_allclose(vega_fd(real_params, 0.2)(z), vq(z), rtol=1e-7)


def test_delta1_closed_vs_quadrature_on_z_grid():
    p = MarketParams(mu=0.07)
    # sigma in (0.19, 0.20) keeps every level in the real-root regime
    m = ou_logistic_model(rho=-0.5, sigma_lo=0.19, sigma_hi=0.20, regime="slow")
    for z in np.linspace(-1, 1, 5):
        c = delta1_slow(m, p, z)
        assert c.method == "closed"
        sol = solve_zeroth(p, float(m.f(z)))
        ref = delta1_quadrature(sol, c.V1, "slow")
        assert c.delta1 == pytest.approx(ref, rel=1e-7)
        assert sol.Delta0 == c.Delta0 and sol.L0 == c.L0


def test_null_and_linearity(real_params):
    m = ou_logistic_model(rho=0.0, sigma_lo=0.19, sigma_hi=0.23, regime="slow")
    c = slow_correction(m, real_params, 0.0)
    assert (c.delta1, c.l1, c.u1) == (0.0, 0.0, 0.0)
    c = slow_correction(constant_vol_model(0.2, rho=-0.5, regime="slow"), real_params, 0.4)
    assert (c.delta1, c.l1, c.u1) == (0.0, 0.0, 0.0)
    a = slow_correction_at(real_params, 0.2, -1.0)
    b = slow_correction_at(real_params, 0.2, -2.5)
    for x, y in ((a.delta1, b.delta1), (a.l1, b.l1), (a.u1, b.u1)):
        assert y == pytest.approx(2.5 * x, rel=1e-9)


def test_v1_residual_and_boundaries(real_sol):
    V1 = -1.0
    vb = vega_block(real_sol)
    vq = vega_function(real_sol, vb)
    d1 = delta1_slow_closed(real_sol, vb, V1)
    v1, coeffs = v1_slow_coeffs(real_sol, vb, V1, d1)
    z = np.linspace(real_sol.L0, real_sol.U0, 100)
    assert ode_residual(v1, slow_v1_operator(real_sol, V1, d1, vq), z) < 1e-8
    g, lam = real_sol.params.gamma, real_sol.params.lam
    for b, a in ((real_sol.L0, 1 + real_sol.L0), (real_sol.U0, 1 / (1 - lam) + real_sol.U0)):
        t1, t2 = a * v1(b, 1), (1 - g) * v1(b)
        assert abs(t1 - t2) / (abs(t1) + abs(t2)) < 1e-10
    assert set(coeffs) >= {"c_tilde_plus", "c_tilde_minus", "d_tilde_plus", "d_tilde_minus",
                           "C_plus"}


def test_zero_block(real_sol):
    v1, coeffs = v1_slow_coeffs(real_sol, vega_block(real_sol), 0.0, 0.0)
    assert len(v1) == 0 and all(v == 0.0 for v in coeffs.values())
    assert boundary_corrections_slow(real_sol, v1 + real_sol.v0) == pytest.approx((0.0, 0.0), abs=1e-10)


def test_log_squared_terms_vanish_without_theta_dot(real_sol):
    vb = vega_block(real_sol)
    frozen = VegaBlock(**{**vb.to_dict(), "theta_dot_plus": 0.0, "theta_dot_minus": 0.0})
    _, coeffs = v1_slow_coeffs(real_sol, frozen, -1.0, 0.1)
    assert coeffs["d_tilde_plus"] == 0.0 and coeffs["d_tilde_minus"] == 0.0


def test_slow_real_shifts_down(real_params):
    c = slow_correction_at(real_params, 0.2, -1.0)
    assert c.l1 < 0 and c.u1 < 0
    assert {"Q_plus", "Q_minus", "R_plus", "R_minus", "D"} <= set(c.coefficients)


def test_numeric_path_agrees_with_closed_form(real_params):
    a = slow_correction_at(real_params, 0.2, -1.0, method="closed")
    b = slow_correction_at(real_params, 0.2, -1.0, method="numeric")
    assert b.delta1 == pytest.approx(a.delta1, rel=1e-7)
    assert b.l1 == pytest.approx(a.l1, rel=1e-6)
    assert b.u1 == pytest.approx(a.u1, rel=1e-6)


def test_complex_case_numeric(complex_params, complex_sol):
    c = slow_correction_at(complex_params, 0.2, -1.0)
    assert c.method == "numeric" and c.case == "complex"
    assert c.fredholm_residual < 1e-8
    ref = delta1_quadrature(complex_sol, -1.0, "slow")
    assert c.delta1 == pytest.approx(ref, rel=1e-7)
    z = np.linspace(complex_sol.L0, complex_sol.U0, 12)
    vq = vega_fd(complex_params, 0.2)
    assert ode_residual(c.v1, slow_v1_operator(complex_sol, -1.0, c.delta1, vq), z) < 1e-8


def test_v1_slow_from_model():
    m = ou_logistic_model(rho=-0.5, regime="slow")
    assert v1_slow(m, 0.0) < 0
