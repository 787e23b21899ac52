"""Independent numerical ground truth for the closed forms.

The shooting solver integrates the no-trade ODE directly and never touches
the closed-form basis; the remaining helpers are adaptive quadrature,
pointwise ODE residuals and finite differences.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .exceptions import ConsistencyError, DomainError, EigenvalueNotFoundError

QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=400)


@dataclass(frozen=True)
class ShootingResult:
    Delta0: float
    L0: float
    U0: float
    grid_values: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    residuals: tuple = ()


def _nt_rhs(eta, y, mu, half_s2, c0):
    # v as a function of eta = log(zeta): 1/2 s^2 (v'' - v') + mu v' - (1-g) Delta v = 0
    v, dv = y
    return (dv, dv - (mu * dv - c0 * v) / half_s2)


def _shoot(params, sigma, delta, lo, hi, dense=False):
    g, lam, mu = params.gamma, params.lam, params.mu
    half_s2 = 0.5 * sigma**2
    c0 = (1 - g) * delta
    # lower buy condition (1+L) v' = (1-g) v fixes the data up to scale
    y0 = (1.0, (1 - g) * lo / (1 + lo))
    sol = integrate.solve_ivp(_nt_rhs, (np.log(lo), np.log(hi)), y0, method="RK45",
                              rtol=1e-11, atol=1e-14, dense_output=dense,
                              args=(mu, half_s2, c0))
    if not sol.success:
        raise EigenvalueNotFoundError(f"shooting integration failed: {sol.message}")

    def derivs(zeta, v, dv):
        d1 = dv / zeta
        d2 = (mu * -dv + c0 * v) / (half_s2 * zeta**2)  # from the ODE
        return d1, d2

    v_l, dv_l = y0
    d1l, d2l = derivs(lo, v_l, dv_l)
    v_u, dv_u = sol.y[0, -1], sol.y[1, -1]
    d1u, d2u = derivs(hi, v_u, dv_u)
    a = 1 / (1 - lam) + hi

    def scaled(*terms):
        return sum(terms) / sum(abs(t) for t in terms)

    res = (scaled((1 + lo) * d2l, g * d1l),
           scaled(a * d1u, -(1 - g) * v_u),
           scaled(a * d2u, g * d1u))
    return res, sol


def _initial_guess(params, sigma):
    # leading-order gap asymptotics around the Merton point
    mu, g, lam = params.mu, params.gamma, params.lam
    pm = mu / (g * sigma**2)
    dmax = mu**2 / (2 * g * sigma**2)
    lt = g * sigma**2 * (0.75 / g * pm**2 * (1 - pm) ** 2 * max(lam, 1e-12)) ** (1 / 3)
    pi_m, pi_p = pm - lt / (g * sigma**2), pm + lt / (g * sigma**2)
    delta = dmax - lt**2 / (2 * g * sigma**2)
    return delta, pi_m / (1 - pi_m), pi_p / ((1 - lam) * (1 - pi_p))


def shoot_zeroth(params, sigma, init_guess=None, max_iter=200):
    """Zeroth-order eigenpair by shooting from the buy boundary.

    Unknowns are scaled to ``(Delta0/delta_max, log L0, log U0)``; a bounded
    trust-region least-squares iteration drives the three remaining boundary
    residuals to zero, polished by Powell's hybrid method if needed.
    """
    params.check_merton_bound(sigma)
    if params.lam == 0:
        raise DomainError("shooting needs a positive transaction cost")
    dmax = params.mu**2 / (2 * params.gamma * sigma**2)
    guess = _initial_guess(params, sigma) if init_guess is None else init_guess
    x0 = np.array([guess[0] / dmax, np.log(guess[1]), np.log(guess[2])])
    count = [0]

    def fun(x):
        count[0] += 1
        if not x[1] < x[2]:
            return np.full(3, 1e3)
        try:
            res, _ = _shoot(params, sigma, x[0] * dmax, np.exp(x[1]), np.exp(x[2]))
        except EigenvalueNotFoundError:
            return np.full(3, 1e3)
        return np.asarray(res)

    # the band brackets the Merton ratio; bounds keep the iterate off spurious roots
    z_m = np.log(params.merton_proportion(sigma) / (1 - params.merton_proportion(sigma)))
    lb, ub = [1e-12, -50.0, z_m], [1.0, z_m, 50.0]
    x0 = np.clip(x0, np.array(lb) + 1e-9, np.array(ub) - 1e-9)
    best = optimize.least_squares(fun, x0, bounds=(lb, ub), method="trf", xtol=1e-15,
                                  ftol=1e-15, gtol=1e-15, max_nfev=max_iter)
    if np.max(np.abs(best.fun)) > 1e-12:
        polish = optimize.root(fun, best.x, method="hybr", options=dict(xtol=1e-14))
        if np.max(np.abs(polish.fun)) < np.max(np.abs(best.fun)):
            best = polish
    x = best.x
    delta, lo, hi = x[0] * dmax, float(np.exp(x[1])), float(np.exp(x[2]))
    res, path = _shoot(params, sigma, delta, lo, hi, dense=True)
    eta = np.linspace(np.log(lo), np.log(hi), 101)
    y = path.sol(eta)
    zeta = np.exp(eta)
    grid = np.column_stack([zeta, y[0], y[1] / zeta])
    converged = bool(max(abs(r) for r in res) < 1e-9)
    if not converged:
        raise EigenvalueNotFoundError(
            f"shooting did not converge: residuals {res}, iterate {(delta, lo, hi)}")
    return ShootingResult(Delta0=float(delta), L0=lo, U0=hi, grid_values=grid,
                          converged=converged, iterations=count[0],
                          residuals=tuple(float(r) for r in res))


def _quad(fn, lo, hi):
    val, err, info = integrate.quad(fn, lo, hi, full_output=True, **QUAD_OPTS)[:3]
    if abs(err) > 1e-8 * max(abs(val), 1e-300):
        raise ConsistencyError(
            f"quadrature on [{lo}, {hi}] did not converge: value {val}, error {err}, "
            f"{info['last']} subintervals")
    return val


def delta1_quadrature(sol, V, mode="fast", vega=None):
    """Ratio-of-integrals value of ``delta1``.

    ``mode="fast"`` uses ``D1 D2 v0`` and ``V = V3``; ``mode="slow"`` uses
    ``D1 dV0/dsigma`` and ``V = V1``. ``vega(zeta, order)`` defaults to a
    Richardson difference of re-solved problems.
    """
    if V == 0:
        return 0.0
    g = sol.params.gamma
    v0, w = sol.v0, sol.w
    if mode == "fast":
        def num_fn(z):
            return z * (2 * z * v0(z, 2) + z**2 * v0(z, 3))
    elif mode == "slow":
        if vega is None:
            from .slowscale import vega_fd
            vega = vega_fd(sol.params, sol.sigma)

        def num_fn(z):
            return z * vega(z, 1)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    num = _quad(lambda z: w(z) * num_fn(z), sol.L0, sol.U0)
    den = _quad(lambda z: w(z) * v0(z), sol.L0, sol.U0)
    return V / (1 - g) * num / den


@dataclass(frozen=True)
class Operator:
    """Second-order linear operator ``a2 f'' + a1 f' + a0 f - rhs``."""

    a2: object
    a1: object
    a0: object
    rhs: object = None
    name: str = ""


def nt_operator(sol, rhs=None, name="L_NT"):
    p, s = sol.params, sol.sigma
    return Operator(a2=lambda z: 0.5 * s**2 * z**2, a1=lambda z: p.mu * z,
                    a0=lambda z: -(1 - p.gamma) * sol.Delta0 + 0.0 * z, rhs=rhs, name=name)


def adjoint_operator(sol):
    """``L*_NT w = 1/2 s^2 (z^2 w)'' - mu (z w)' - (1-g) Delta0 w``, expanded."""
    p, s = sol.params, sol.sigma
    half = 0.5 * s**2
    return Operator(a2=lambda z: half * z**2, a1=lambda z: 4 * half * z - p.mu * z,
                    a0=lambda z: 2 * half - p.mu - (1 - p.gamma) * sol.Delta0 + 0.0 * z,
                    name="L*_NT")


def fast_v1_operator(sol, V3, delta1):
    """``L_NT v1 = -V3 D1 D2 v0 + (1-g) delta1 v0``."""
    g, v0 = sol.params.gamma, sol.v0

    def rhs(z):
        d1d2 = z * (2 * z * v0(z, 2) + z**2 * v0(z, 3))
        return -V3 * d1d2 + (1 - g) * delta1 * v0(z)

    return nt_operator(sol, rhs=rhs, name="fast v1")


def slow_v1_operator(sol, V1, delta1, vega):
    """``L_NT v1 = -V1 D1 dV0/dsigma + (1-g) delta1 v0``."""
    g, v0 = sol.params.gamma, sol.v0

    def rhs(z):
        return -V1 * z * vega(z, 1) + (1 - g) * delta1 * v0(z)

    return nt_operator(sol, rhs=rhs, name="slow v1")


def ode_residual(fn, op, points):
    """Max over ``points`` of the term-scaled residual of ``op`` applied to ``fn``.

    ``fn(zeta, order)`` supplies values and derivatives up to order 2.
    """
    z = np.asarray(points, dtype=float)
    t2 = op.a2(z) * np.asarray(fn(z, 2))
    t1 = op.a1(z) * np.asarray(fn(z, 1))
    t0 = op.a0(z) * np.asarray(fn(z, 0))
    r = op.rhs(z) if op.rhs is not None else np.zeros_like(z)
    scale = np.abs(t2) + np.abs(t1) + np.abs(t0) + np.abs(r)
    scale = np.where(scale == 0, 1.0, scale)
    return float(np.max(np.abs(t2 + t1 + t0 - r) / scale))


def finite_diff(fn, x, h, richardson=False):
    """Central difference; with ``richardson`` the fourth-order combination."""
    if not h > 0:
        raise DomainError("step must be positive")
    d1 = (fn(x + h) - fn(x - h)) / (2 * h)
    if not richardson:
        return d1
    d2 = (fn(x + 2 * h) - fn(x - 2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3


def _perturbed_solve(params, sigma, V3, eta, start, theta0):
    """Eigenpair of ``L_NT v + eta V3 D1 D2 v = 0`` with all four boundary conditions.

    On powers ``zeta^theta`` the operator is the cubic
    ``eta V3 (t^3 - t^2) + s^2/2 (t^2 - t) + mu t - (1-g) delta``; the two
    regular roots (continuations of the unperturbed pair) span the solution.
    """
    g, lam, mu = params.gamma, params.lam, params.mu
    half_s2 = 0.5 * sigma**2

    def regular_roots(delta):
        poly = [eta * V3, half_s2 - eta * V3, mu - half_s2, -(1 - g) * delta]
        if eta == 0:
            roots = np.roots(poly[1:])
        else:
            roots = np.roots(poly)
        order = [int(np.argmin(np.abs(roots - t))) for t in theta0]
        return roots[order]

    def basis(delta):
        t = regular_roots(delta)
        if abs(np.imag(t[0])) > 0:
            tc = t[0] if np.imag(t[0]) > 0 else t[1]
            return [(tc, 1.0), (tc, -1j)]
        return [(np.real(t[0]), 1.0), (np.real(t[1]), 1.0)]

    def value(b, zeta, order):
        th, c = b
        fac = 1.0
        for j in range(order):
            fac = fac * (th - j)
        return np.real(c * fac * zeta ** (th - order) + 0j)

    def fun(x):
        delta, lo, hi, ratio = x[0], np.exp(x[1]), np.exp(x[2]), x[3]
        bs = basis(delta)

        def v(zeta, order):
            return value(bs[0], zeta, order) + ratio * value(bs[1], zeta, order)

        a = 1 / (1 - lam) + hi
        out = []
        for z, k in ((lo, 1 + lo), (hi, a)):
            t = (k * v(z, 1), -(1 - g) * v(z, 0))
            out.append(sum(t) / sum(map(abs, t)))
            t = (k * v(z, 2), g * v(z, 1))
            out.append(sum(t) / sum(map(abs, t)))
        return out

    x, info, ier, msg = optimize.fsolve(fun, start, xtol=1e-15, full_output=True)
    if max(abs(r) for r in info["fvec"]) > 1e-11:
        raise EigenvalueNotFoundError(f"perturbed eigenproblem did not converge: {msg}")
    return x


def perturbed_roots_fast(sol, V3, h=1e-5):
    """``(delta1, l1, u1)`` as eta-derivatives of the perturbed eigenproblem.

    Independent of the closed forms: only the unperturbed triple seeds the
    nonlinear solve. Central differences in ``eta`` with one Richardson step.
    """
    if V3 == 0:
        return 0.0, 0.0, 0.0
    c = np.array([sol.c_plus, sol.c_minus])
    theta0 = (complex(sol.theta.theta_plus), complex(sol.theta.theta_minus))
    start = np.array([sol.Delta0, np.log(sol.L0), np.log(sol.U0), c[1] / c[0]])
    def central(step):
        hi_, lo_ = (_perturbed_solve(sol.params, sol.sigma, V3, sgn * step, start, theta0)
                    for sgn in (1, -1))
        return np.array([hi_[0] - lo_[0], np.exp(hi_[1]) - np.exp(lo_[1]),
                         np.exp(hi_[2]) - np.exp(lo_[2])]) / (2 * step)

    d, lo, hi = (4 * central(h) - central(2 * h)) / 3
    return float(d), float(lo), float(hi)
