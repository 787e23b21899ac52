"""First-order correction under slowly varying volatility.

Everything is evaluated at the frozen level ``sigma = f(z)``; corrections
are linear in ``V1(z) = rho f f' beta`` and need the sensitivity of the
constant-volatility solution to ``sigma`` (its "Vega").
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._basis import QuasiPoly
from .constvol import solve_zeroth
from .exceptions import ConsistencyError, DomainError, UnsupportedCaseError
from .fastscale import FREDHOLM_TOL, boundary_corrections, sell_residual
from .model import v1_slow

QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=200)


@dataclass(frozen=True)
class VegaBlock:
    """Derivatives of the zeroth-order quantities with respect to ``sigma``."""

    dpr: float
    pi_dot_minus: float
    pi_dot_plus: float
    L0_dot: float
    U0_dot: float
    k_l_dot: float
    k_u_dot: float
    theta_dot_plus: float
    theta_dot_minus: float
    c_dot_plus: float
    c_dot_minus: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class SlowCorrection:
    z: float
    sigma_z: float
    V1: float
    Delta0: float
    L0: float
    U0: float
    delta1: float
    l1: float
    u1: float
    case: str
    method: str
    coefficients: dict
    v1: object = field(repr=False, default=None)
    fredholm_residual: float = 0.0

    def corrected_band(self, epsilon):
        s = np.sqrt(epsilon)
        return self.L0 + s * self.l1, self.U0 + s * self.u1

    def corrected_rate(self, epsilon):
        return self.Delta0 + np.sqrt(epsilon) * self.delta1

    def to_dict(self):
        return {"z": self.z, "sigma_z": self.sigma_z, "V1": self.V1, "Delta0": self.Delta0,
                "L0": self.L0, "U0": self.U0, "delta1": self.delta1, "l1": self.l1,
                "u1": self.u1, "case": self.case, "method": self.method,
                "fredholm_residual": self.fredholm_residual, **self.coefficients}


def _ratio(sol, numerator):
    g = sol.params.gamma
    w = sol.w
    den, _ = integrate.quad(lambda z: w(z) * sol.v0(z), sol.L0, sol.U0, **QUAD_OPTS)
    if abs(den) < 1e-300:
        raise ConsistencyError("adjoint normalization integral vanished")
    num, _ = integrate.quad(lambda z: w(z) * numerator(z), sol.L0, sol.U0, **QUAD_OPTS)
    return num / ((1 - g) * den)


def delta_prime(sol):
    """``d Delta0 / d sigma`` as a ratio of adjoint-weighted integrals."""
    d2 = sol.v0.euler(2)
    return sol.sigma * _ratio(sol, d2)


def vega_block(sol, dpr=None):
    """Closed-form sigma-derivatives of the real-root zeroth-order solution."""
    if not sol.theta.is_real:
        raise UnsupportedCaseError(
            "closed-form Vega is only available for real roots; use vega_fd for complex roots")
    if dpr is None:
        dpr = delta_prime(sol)
    p, s = sol.params, sol.sigma
    mu, g, lam = p.mu, p.gamma, p.lam

    def pi_dot(pi):
        return (dpr + g * s * pi**2) / (mu - g * s**2 * pi)

    pdm, pdp = pi_dot(sol.pi_minus), pi_dot(sol.pi_plus)
    l_dot = (1 + sol.L0) ** 2 * pdm
    # dU/dpi_+ = (1-lam) (1/(1-lam) + U)^2
    u_dot = (1 - lam) * (1 / (1 - lam) + sol.U0) ** 2 * pdp
    kl_dot, ku_dot = l_dot / (1 - g), u_dot / (1 - g)

    def theta_dot(th):
        return (s * th * (1 - th) + (1 - g) * dpr) / (s**2 * th + mu - 0.5 * s**2)

    tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
    tdp, tdm = theta_dot(tp), theta_dot(tm)
    lo, kl = sol.L0, sol.k_l
    log_l = np.log(lo)

    def c_dot(th, thd):
        v = lo**th
        v1 = th * lo ** (th - 1)
        v2 = th * (th - 1) * lo ** (th - 2)
        return (v1 * l_dot + v * thd * log_l - kl_dot * v1
                - kl * (thd * v / lo + v2 * l_dot + v1 * thd * log_l))

    return VegaBlock(dpr=float(dpr), pi_dot_minus=float(pdm), pi_dot_plus=float(pdp),
                     L0_dot=float(l_dot), U0_dot=float(u_dot), k_l_dot=float(kl_dot),
                     k_u_dot=float(ku_dot), theta_dot_plus=float(tdp), theta_dot_minus=float(tdm),
                     c_dot_plus=float(c_dot(tm, tdm)), c_dot_minus=float(-c_dot(tp, tdp)))


def vega_function(sol, vega):
    """``d V0 / d sigma`` as a quasi-polynomial in ``zeta`` (real roots)."""
    tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
    return (QuasiPoly.power(tp, vega.c_dot_plus)
            + QuasiPoly.power(tp, vega.theta_dot_plus * sol.c_plus, 1)
            + QuasiPoly.power(tm, vega.c_dot_minus)
            + QuasiPoly.power(tm, vega.theta_dot_minus * sol.c_minus, 1)).simplify()


def vega_fd(params, sigma, rel_step=3e-5):
    """``d V0 / d sigma`` by a fourth-order central difference of re-solved problems.

    The result is an exact quasi-polynomial combination of the four shifted
    solutions, so its ``zeta``-derivatives need no further differencing.
    """
    h = rel_step * sigma
    sols = {j: solve_zeroth(params, sigma + j * h) for j in (-2, -1, 1, 2)}
    return ((8.0 / (12 * h)) * (sols[1].v0 - sols[-1].v0)
            - (1.0 / (12 * h)) * (sols[2].v0 - sols[-2].v0)).simplify()


def delta1_slow_closed(sol, vega, V1, full=False):
    """Real-root closed form of ``delta1(z)`` (exact integration of the adjoint ratio).

    With ``full=True`` also returns the intermediates ``Q_pm, R_pm, D``.
    """
    g = sol.params.gamma
    tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
    dth = tp - tm
    cp, cm = sol.c_plus, sol.c_minus
    tdp, tdm = vega.theta_dot_plus, vega.theta_dot_minus
    qp = tp * vega.c_dot_plus + cp * tdp
    qm = tm * vega.c_dot_minus + cm * tdm
    lo, hi = sol.L0, sol.U0
    ll, lh = np.log(lo), np.log(hi)
    rp = hi**dth - lo**dth
    rm = hi**-dth - lo**-dth
    log_ratio = lh - ll
    d = cp**2 * rp - cm**2 * rm + 2 * cp * cm * dth * log_ratio
    num = (cp * qp * rp - cm * qm * rm + (cm * qp + cp * qm) * dth * log_ratio
           + cp**2 * tp * tdp * (hi**dth * lh - lo**dth * ll - rp / dth)
           - cm**2 * tm * tdm * (hi**-dth * lh - lo**-dth * ll + rm / dth)
           + cp * cm * (tp * tdp + tm * tdm) * dth * 0.5 * (lh**2 - ll**2))
    delta1 = V1 / ((1 - g) * d) * num
    if full:
        return delta1, {"Q_plus": float(qp), "Q_minus": float(qm), "R_plus": float(rp),
                        "R_minus": float(rm), "D": float(d)}
    return delta1


def v1_slow_coeffs(sol, vega, V1, delta1):
    """Real-root particular solution ``v1`` (gauge ``xi = 0``, ``C_- = 0``)."""
    if not sol.theta.is_real:
        raise UnsupportedCaseError("closed-form slow v1 needs real roots")
    if V1 == 0 and delta1 == 0:
        zero = {k: 0.0 for k in ("c_tilde_plus", "c_tilde_minus", "d_tilde_plus",
                                 "d_tilde_minus", "C_plus", "b1")}
        return QuasiPoly(), zero
    g, s2 = sol.params.gamma, sol.sigma**2
    tp, tm = sol.theta.theta_plus.real, sol.theta.theta_minus.real
    dth = tp - tm
    cp, cm = sol.c_plus, sol.c_minus
    tdp, tdm = vega.theta_dot_plus, vega.theta_dot_minus
    qp = tp * vega.c_dot_plus + cp * tdp
    qm = tm * vega.c_dot_minus + cm * tdm
    ct_p = 2 / s2 * (qp * V1 - (1 - g) * delta1 * cp) / dth
    ct_m = 2 / s2 * (qm * V1 - (1 - g) * delta1 * cm) / dth
    dt_p = 2 * V1 / s2 * tdp * cp * tp / dth
    dt_m = 2 * V1 / s2 * tdm * cm * tm / dth
    part = (QuasiPoly.power(tp, -(ct_p - dt_p / dth), 1)
            + QuasiPoly.power(tm, ct_m + dt_m / dth, 1)
            + QuasiPoly.power(tp, -dt_p / 2, 2)
            + QuasiPoly.power(tm, dt_m / 2, 2)).simplify()
    lo, kl = sol.L0, sol.k_l
    b1 = part(lo) - kl * part(lo, 1)
    c_plus = b1 / (kl * tp * lo ** (tp - 1) - lo**tp)
    v1 = (part + QuasiPoly.power(tp, c_plus)).simplify()
    coeffs = {"c_tilde_plus": float(ct_p), "c_tilde_minus": float(ct_m),
              "d_tilde_plus": float(dt_p), "d_tilde_minus": float(dt_m),
              "C_plus": float(c_plus), "b1": float(b1)}
    return v1, coeffs


class NumericV1:
    """First-order solution by numerical variation of parameters.

    ``v1 = (A_+ + C_+) v_+ + A_- v_-`` with ``A_pm(L0) = 0`` and
    ``A_pm' = -/+ v_-/+ F / W``; used when no closed form is available.
    """

    def __init__(self, sol, source):
        self.sol = sol
        self.vp, self.vm = sol.basis
        half_s2 = 0.5 * sol.sigma**2
        self.forcing = lambda z: source(z) / (half_s2 * z**2)
        g = sol.params.gamma
        lo = sol.L0
        self.c_plus = 0.0
        # A(L0) = 0, so the lower condition fixes C_+ from the basis alone: C_+ = 0
        den = (1 + lo) * self.vp(lo, 1) - (1 - g) * self.vp(lo)
        if den == 0:
            raise ConsistencyError("lower boundary condition degenerate for v_+")

    def _wronskian(self, z):
        return self.vp(z) * self.vm(z, 1) - self.vp(z, 1) * self.vm(z)

    def coefficients(self, z):
        lo = self.sol.L0

        def ap(u):
            return -self.vm(u) * self.forcing(u) / self._wronskian(u)

        def am(u):
            return self.vp(u) * self.forcing(u) / self._wronskian(u)

        a_p = integrate.quad(ap, lo, z, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        a_m = integrate.quad(am, lo, z, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        return a_p, a_m

    def __call__(self, zeta, order=0):
        z = np.atleast_1d(np.asarray(zeta, dtype=float))
        out = np.empty_like(z)
        for i, x in enumerate(z):
            a_p, a_m = self.coefficients(x)
            val = (a_p + self.c_plus) * self.vp(x, order) + a_m * self.vm(x, order)
            if order == 2:
                val += self.forcing(x)
            elif order > 2:
                raise ValueError("numeric v1 supports derivatives up to order 2")
            out[i] = val
        return out if np.ndim(zeta) else float(out[0])

    def __len__(self):
        return 1


def slow_correction(model, params, z, method=None, check=True):
    """``delta1(z)``, ``v1`` and ``(l1(z), u1(z))`` at factor level ``z``.

    ``method`` is ``"closed"`` (real roots), ``"numeric"`` (quadrature with a
    finite-difference Vega and numerical variation of parameters) or ``None``
    to choose by root case.
    """
    sigma = float(model.f(z))
    sol = solve_zeroth(params, sigma)
    V1 = v1_slow(model, z)
    if method is None:
        method = "closed" if sol.theta.is_real else "numeric"
    return _slow_from_solution(sol, V1, method, z=z, check=check)


def slow_correction_at(params, sigma, V1, method=None, z=float("nan"), check=True):
    """Slow correction for a frozen volatility ``sigma`` and group parameter ``V1``."""
    sol = solve_zeroth(params, sigma)
    if method is None:
        method = "closed" if sol.theta.is_real else "numeric"
    return _slow_from_solution(sol, V1, method, z=z, check=check)


def _slow_from_solution(sol, V1, method, z=float("nan"), check=True):
    g = sol.params.gamma
    if method == "closed":
        vega = vega_block(sol)
        delta1, inter = delta1_slow_closed(sol, vega, V1, full=True)
        delta1 = float(delta1) if V1 else 0.0
        v1, coeffs = v1_slow_coeffs(sol, vega, V1, delta1)
        coeffs = {**coeffs, **inter}
        empty = len(v1) == 0
    elif method == "numeric":
        vega_q = vega_fd(sol.params, sol.sigma)
        dv = vega_q.euler(1)
        delta1 = float(V1 * _ratio(sol, dv)) if V1 else 0.0
        if V1 == 0:
            v1, empty = QuasiPoly(), True
        else:
            source = (-V1) * dv + ((1 - g) * delta1) * sol.v0
            v1, empty = NumericV1(sol, source), False
        coeffs = {}
    else:
        raise DomainError(f"unknown method {method!r}")
    if empty:
        l1 = u1 = 0.0
        resid = 0.0
    else:
        resid = sell_residual(sol, v1)
        if check and resid > FREDHOLM_TOL:
            raise ConsistencyError(f"upper boundary condition violated by slow v1 ({resid:.3g})")
        l1, u1 = boundary_corrections(sol, v1)
    return SlowCorrection(z=float(z), sigma_z=sol.sigma, V1=float(V1), Delta0=sol.Delta0,
                          L0=sol.L0, U0=sol.U0, delta1=delta1, l1=l1, u1=u1,
                          case=sol.case.value, method=method, coefficients=coeffs, v1=v1,
                          fredholm_residual=float(resid))


def delta1_slow(model, params, z):
    """Slow correction at ``z``; ``.delta1`` holds the rate correction."""
    return slow_correction(model, params, z)


def boundary_corrections_slow(sol, v1):
    return boundary_corrections(sol, v1)
