"""First-order correction under fast mean-reverting volatility.

The zeroth-order solution is taken at ``sigma_bar``; every correction is
linear in the group parameter ``V3``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._basis import QuasiPoly
from .exceptions import ConsistencyError, DegenerateBoundaryError, DomainError

FREDHOLM_TOL = 1e-8


@dataclass(frozen=True)
class FastCorrection:
    V3: float
    delta1: float
    l1: float
    u1: float
    case: str
    C_plus: float
    coefficients: dict
    v1: QuasiPoly = field(repr=False)
    fredholm_residual: float = 0.0
    xi: float = 0.0

    def corrected_band(self, sol, epsilon):
        s = np.sqrt(epsilon)
        return sol.L0 + s * self.l1, sol.U0 + s * self.u1

    def corrected_rate(self, sol, epsilon):
        return sol.Delta0 + np.sqrt(epsilon) * self.delta1

    def to_dict(self):
        return {"V3": self.V3, "delta1": self.delta1, "l1": self.l1, "u1": self.u1,
                "case": self.case, "C_plus": self.C_plus, "xi": self.xi,
                "fredholm_residual": self.fredholm_residual, **self.coefficients}


def d1d2_v0(sol):
    """``D1 D2 v0 = zeta d/dzeta (zeta^2 v0'')``."""
    return sol.v0.euler(2).euler(1).simplify()


def _complex_vectors(sol):
    th = sol.theta
    tr, ti = th.theta_r, th.theta_i
    big = np.array([[tr, ti], [-ti, tr]])
    c = np.array([sol.c_plus, sol.c_minus])
    q = (np.linalg.matrix_power(big, 3) - big @ big) @ c
    return c, q


def delta1_fast(sol, V3):
    """Growth-rate correction ``delta1`` from the closed forms of the two root cases."""
    if V3 == 0:
        return 0.0
    g = sol.params.gamma
    lo, hi = sol.L0, sol.U0
    if sol.theta.is_real:
        tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
        dth = tp - tm
        if abs(dth) < 1e-9:
            raise DegenerateBoundaryError("theta+ == theta-")
        lp, lm = (tp - 1) * tp**2, (tm - 1) * tm**2
        cp, cm = sol.c_plus, sol.c_minus
        rp = hi**dth - lo**dth
        rm = hi**-dth - lo**-dth
        log_ratio = np.log(hi / lo)
        num = lp * cp**2 * rp - lm * cm**2 * rm + cp * cm * dth * (lp + lm) * log_ratio
        den = cp**2 * rp - cm**2 * rm + 2 * cp * cm * dth * log_ratio
        return V3 / (1 - g) * num / den
    ti = sol.theta.theta_i
    c, q = _complex_vectors(sol)
    c_hat = np.array([c[0], -c[1]])
    c_check = c[::-1]
    q_check = q[::-1]

    def bracket(a, b, b_check):
        def at(eta):
            return (0.5 * (c_hat @ b) * np.sin(2 * ti * eta) + (a @ b) * ti * eta
                    - 0.5 * (a @ b_check) * np.cos(2 * ti * eta))
        return at(np.log(hi)) - at(np.log(lo))

    return V3 / (1 - g) * bracket(c, q, q_check) / bracket(c, c, c_check)


def v1_fast(sol, V3, delta1):
    """Coefficients of the particular first-order solution (gauge ``xi = 0``, ``C_- = 0``)."""
    g = sol.params.gamma
    half_s2 = 0.5 * sol.sigma**2
    lo = sol.L0
    if V3 == 0 and delta1 == 0:
        return QuasiPoly(), 0.0, _zero_coefficients(sol)
    if sol.theta.is_real:
        tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
        dth = tp - tm
        lp, lm = (tp - 1) * tp**2, (tm - 1) * tm**2
        ct_p = -sol.c_plus * ((1 - g) * delta1 - V3 * lp) / (half_s2 * dth)
        ct_m = -sol.c_minus * ((1 - g) * delta1 - V3 * lm) / (half_s2 * dth)
        kl, llog = sol.k_l, np.log(lo)
        c_plus = (ct_m * (lo * llog - kl * (1 + tm * llog)) / (kl * tp * lo**dth - lo ** (dth + 1))
                  - ct_p * (lo * llog - kl * (1 + tp * llog)) / (kl * tp - lo))
        v1 = (QuasiPoly.power(tp, c_plus) + QuasiPoly.power(tp, -ct_p, 1)
              + QuasiPoly.power(tm, ct_m, 1)).simplify()
        return v1, float(c_plus), {"c_tilde_plus": float(ct_p), "c_tilde_minus": float(ct_m)}
    ti = sol.theta.theta_i
    c, q = _complex_vectors(sol)
    q_t = -V3 / half_s2 * q + (1 - g) * delta1 / half_s2 * c
    vp, vm = sol.basis
    eta = QuasiPoly.power(0.0, 1.0, 1)
    cos2 = QuasiPoly.power(2j * ti)
    sin2 = QuasiPoly.power(2j * ti, -1j)
    a_plus = (-q_t[1] / (2 * ti)) * eta + (q_t[1] / (4 * ti**2)) * sin2 + (q_t[0] / (4 * ti**2)) * cos2
    a_minus = (q_t[0] / (2 * ti)) * eta + (q_t[0] / (4 * ti**2)) * sin2 + (-q_t[1] / (4 * ti**2)) * cos2
    part = (a_plus * vp + a_minus * vm).simplify()
    num = (1 + lo) * part(lo, 1) - (1 - g) * part(lo)
    den = (1 + lo) * vp(lo, 1) - (1 - g) * vp(lo)
    c_plus = -num / den
    v1 = (part + c_plus * vp).simplify()
    coeffs = {"q_plus": float(q[0]), "q_minus": float(q[1]),
              "q_tilde_plus": float(q_t[0]), "q_tilde_minus": float(q_t[1])}
    return v1, float(c_plus), coeffs


def _zero_coefficients(sol):
    if sol.theta.is_real:
        return {"c_tilde_plus": 0.0, "c_tilde_minus": 0.0}
    return {"q_plus": 0.0, "q_minus": 0.0, "q_tilde_plus": 0.0, "q_tilde_minus": 0.0}


def sell_residual(sol, v):
    """Scaled residual of the upper mixed condition ``S v |_U0 = 0``."""
    g, lam = sol.params.gamma, sol.params.lam
    a = 1 / (1 - lam) + sol.U0
    t1, t2 = a * v(sol.U0, 1), (1 - g) * v(sol.U0)
    # scale by the v0 terms: v1 may vanish identically at U0
    s1, s2 = a * sol.v0(sol.U0, 1), (1 - g) * sol.v0(sol.U0)
    scale = abs(t1) + abs(t2) + abs(s1) + abs(s2)
    return abs(t1 - t2) / scale


def boundary_corrections(sol, v1):
    """Constant boundary shifts ``(l1, u1)`` from the second-order smooth-pasting expansion."""
    g, lam = sol.params.gamma, sol.params.lam
    out = []
    for z, a in ((sol.L0, 1 + sol.L0), (sol.U0, 1 / (1 - lam) + sol.U0)):
        den = a * sol.v0(z, 3) + (1 + g) * sol.v0(z, 2)
        scale = abs(a * sol.v0(z, 3)) + abs((1 + g) * sol.v0(z, 2))
        if abs(den) <= 1e-14 * scale or den == 0:
            raise DegenerateBoundaryError(f"vanishing boundary-correction denominator at zeta={z}")
        out.append(-(a * v1(z, 2) + g * v1(z, 1)) / den)
    return float(out[0]), float(out[1])


def fast_correction(sol, V3, check=True):
    """``delta1``, ``v1`` and ``(l1, u1)`` for group parameter ``V3``."""
    delta1 = float(delta1_fast(sol, V3))
    v1, c_plus, coeffs = v1_fast(sol, V3, delta1)
    if len(v1) == 0:
        l1 = u1 = 0.0
        resid = 0.0
    else:
        resid = sell_residual(sol, v1)
        if check and resid > FREDHOLM_TOL:
            raise ConsistencyError(f"upper boundary condition violated by v1 (residual {resid:.3g})")
        l1, u1 = boundary_corrections(sol, v1)
    return FastCorrection(V3=float(V3), delta1=delta1, l1=l1, u1=u1, case=sol.case.value,
                          C_plus=c_plus, coefficients=coeffs, v1=v1, fredholm_residual=float(resid))


def boundary_corrections_fast(sol, corr):
    return corr.l1, corr.u1


def eval_v1(corr, sol, zeta, order=0, xi=None):
    """``v1`` (plus ``xi * v0``) or its first two derivatives."""
    if not 0 <= order <= 2:
        raise ValueError("order must be 0..2")
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise DomainError("v1 is defined for zeta > 0")
    xi = corr.xi if xi is None else xi
    val = corr.v1(z, order) if len(corr.v1) else np.zeros_like(z)
    if xi:
        val = val + xi * sol.v0(z, order)
    return val
