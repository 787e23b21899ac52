"""Constant-volatility free-boundary eigenvalue problem for the no-trade band."""

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ._basis import QuasiPoly
from .exceptions import CollapsedBandError, DomainError, EigenvalueNotFoundError

THETA_GAP_GUARD = 1e-9


class Case(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class ThetaRoots:
    """Roots of ``sigma^2/2 th^2 + (mu - sigma^2/2) th - (1-gamma) Delta = 0``.

    For complex roots ``theta_plus = theta_r + i theta_i`` with ``theta_i > 0``.
    """

    theta_plus: complex
    theta_minus: complex

    @property
    def is_real(self):
        return self.theta_plus.imag == 0.0

    @property
    def theta_r(self):
        return self.theta_plus.real

    @property
    def theta_i(self):
        return self.theta_plus.imag

    @property
    def delta(self):
        """``theta_plus - theta_minus`` (real case)."""
        return (self.theta_plus - self.theta_minus).real


def merton(params, sigma):
    """Merton proportion and frictionless excess growth rate at volatility ``sigma``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    pi_m = params.mu / (params.gamma * sigma**2)
    delta_max = params.mu**2 / (2 * params.gamma * sigma**2)
    return pi_m, delta_max


def classify_case(params, sigma):
    """Small-cost classification of the roots at ``Delta0 = delta_max``."""
    params.check_merton_bound(sigma)
    g = params.gamma
    if g < 1:
        return Case.REAL
    k = params.mu / (0.5 * sigma**2)
    half = np.sqrt(g * (g - 1))
    return Case.COMPLEX if g - half < k < g + half else Case.REAL


def theta_discriminant(params, sigma, delta0):
    """``(k-1)^2 - 4 k1 Delta`` with ``k1 = -(1-gamma)/(sigma^2/2)``."""
    k = params.mu / (0.5 * sigma**2)
    k1 = -(1 - params.gamma) / (0.5 * sigma**2)
    return (k - 1) ** 2 - 4 * k1 * delta0


def theta_roots(params, sigma, delta0):
    k = params.mu / (0.5 * sigma**2)
    disc = theta_discriminant(params, sigma, delta0)
    if disc >= 0:
        s = np.sqrt(disc)
        return ThetaRoots(complex(0.5 * (1 - k + s)), complex(0.5 * (1 - k - s)))
    s = np.sqrt(-disc)
    return ThetaRoots(complex(0.5 * (1 - k), 0.5 * s), complex(0.5 * (1 - k), -0.5 * s))


def _band_from_gap(params, sigma, gap):
    """pi_-, pi_+, L, U for ``Delta = delta_max - gap`` without cancellation."""
    gs2 = params.gamma * sigma**2
    lam_t = np.sqrt(2 * gs2 * gap)
    pi_m = (params.mu - lam_t) / gs2
    pi_p = (params.mu + lam_t) / gs2
    lower = pi_m / (1 - pi_m)
    upper = pi_p / ((1 - params.lam) * (1 - pi_p))
    return pi_m, pi_p, lower, upper


def _boundary_determinant(params, sigma, gap):
    """Determinant of the first-order boundary matrix in a continuous basis.

    The fundamental pair ``zeta^theta_r * (cosh, sinh/s)(s log(zeta/L))`` is
    analytic in ``s^2`` and so passes smoothly from the real to the complex
    root region; the determinant in this basis differs from the one in the
    power/trigonometric basis only by a nonvanishing factor.
    """
    pi_m, pi_p, lower, upper = _band_from_gap(params, sigma, gap)
    if not (0 < pi_m and pi_p < 1):
        return np.nan
    delta = merton(params, sigma)[1] - gap
    k = params.mu / (0.5 * sigma**2)
    th_r = 0.5 * (1 - k)
    h = 0.25 * theta_discriminant(params, sigma, delta)
    x = np.log(upper / lower)
    # a = k_l / L = 1 / ((1-gamma) pi_-), likewise at U
    a_l = 1.0 / ((1 - params.gamma) * pi_m)
    a_u = 1.0 / ((1 - params.gamma) * pi_p)
    if h > 0:
        s = np.sqrt(h)
        t = np.tanh(s * x)
        c, c_x, sh, sh_x = 1.0, s * t, (t / s if s * x > 1e-8 else x), 1.0
    elif h < 0:
        s = np.sqrt(-h)
        c, c_x, sh, sh_x = np.cos(s * x), -s * np.sin(s * x), np.sin(s * x) / s, np.cos(s * x)
    else:
        c, c_x, sh, sh_x = 1.0, 0.0, x, 1.0
    row_l = (1 - a_l * th_r, -a_l)
    row_u = (c - a_u * (th_r * c + c_x), sh - a_u * (th_r * sh + sh_x))
    return row_l[0] * row_u[1] - row_l[1] * row_u[0]


@dataclass(frozen=True)
class ZerothOrderSolution:
    """Eigenpair of the constant-volatility problem at volatility ``sigma``.

    ``c_plus``/``c_minus`` follow the normalization that makes the lower
    first-order boundary condition hold identically; the overall constant is
    arbitrary and every reported quantity is invariant to it.
    """

    params: object
    sigma: float
    Delta0: float
    gap: float
    pi_minus: float
    pi_plus: float
    L0: float
    U0: float
    theta: ThetaRoots
    c_plus: float
    c_minus: float
    k: float
    k_l: float
    k_u: float
    k_minus: float
    k_plus: float
    case: Case
    eigenvalues: tuple = ()
    scan_sign_changes: int = 1
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def delta_max(self):
        return merton(self.params, self.sigma)[1]

    @property
    def pi_merton(self):
        return merton(self.params, self.sigma)[0]

    @property
    def basis(self):
        """The two fundamental solutions ``(v_plus, v_minus)``."""
        th = self.theta
        if th.is_real:
            return QuasiPoly.power(th.theta_plus.real), QuasiPoly.power(th.theta_minus.real)
        return QuasiPoly.power(th.theta_plus), QuasiPoly.power(th.theta_plus, coef=-1j)

    @property
    def v0(self):
        vp, vm = self.basis
        return (self.c_plus * vp + self.c_minus * vm).simplify()

    @property
    def w(self):
        """Adjoint eigenfunction ``zeta^(k-2) v0``."""
        return self.v0.times_power(self.k - 2)

    def rescaled(self, factor):
        """Same eigenpair with ``c_plus, c_minus`` multiplied by ``factor``."""
        return replace(self, c_plus=self.c_plus * factor, c_minus=self.c_minus * factor)

    def boundary_matrix(self):
        """Rows ``v(B) - k_B v'(B)`` for each basis function at ``L0`` and ``U0``."""
        vp, vm = self.basis
        m = np.empty((2, 2))
        for j, v in enumerate((vp, vm)):
            m[0, j] = v(self.L0) - self.k_l * v(self.L0, 1)
            m[1, j] = v(self.U0) - self.k_u * v(self.U0, 1)
        return m

    def determinant_residual(self):
        """``|det M|`` scaled by the product of the row norms."""
        m = self.boundary_matrix()
        return abs(np.linalg.det(m)) / (np.linalg.norm(m[0]) * np.linalg.norm(m[1]))

    def smooth_pasting_residuals(self, v=None):
        """Scaled residuals of the four free-boundary conditions for ``v`` (default ``v0``)."""
        v = self.v0 if v is None else v
        g, lam = self.params.gamma, self.params.lam
        out = {}
        for name, z, a in (("lower", self.L0, 1.0 + self.L0),
                           ("upper", self.U0, 1.0 / (1.0 - lam) + self.U0)):
            v0, v1, v2 = v(z), v(z, 1), v(z, 2)
            out[f"{name}_value"] = abs(a * v1 - (1 - g) * v0) / (abs(a * v1) + abs((1 - g) * v0))
            out[f"{name}_slope"] = abs(a * v2 + g * v1) / (abs(a * v2) + abs(g * v1))
        return out

    def transcendental_residual(self):
        """Scaled residual of the case-specific eigenvalue equation at ``Delta0``."""
        return eigen_equation(self.params, self.sigma, self.Delta0, self.case)

    def to_dict(self):
        th = self.theta
        d = dict(
            sigma=self.sigma, Delta0=self.Delta0, delta_max=self.delta_max,
            pi_merton=self.pi_merton, pi_minus=self.pi_minus, pi_plus=self.pi_plus,
            L0=self.L0, U0=self.U0, case=self.case.value, c_plus=self.c_plus,
            c_minus=self.c_minus, k=self.k, k_l=self.k_l, k_u=self.k_u,
            k_minus=self.k_minus, k_plus=self.k_plus,
            eigenvalues=list(self.eigenvalues), scan_sign_changes=self.scan_sign_changes,
        )
        if th.is_real:
            d["theta"] = {"theta_plus": th.theta_plus.real, "theta_minus": th.theta_minus.real}
        else:
            d["theta"] = {"theta_r": th.theta_r, "theta_i": th.theta_i}
        d.update(self.metadata)
        return d


def eigen_equation(params, sigma, delta0, case):
    """Case-specific eigenvalue equation evaluated at ``delta0``, scaled.

    Real roots: ``(th+/pi- + th-/pi+ - (1-2g)) L^dth - (th+/pi+ + th-/pi- - (1-2g)) U^dth``.
    Complex roots: ``th_i (a_l - a_u) cos(psi) + [(a_l th_r - 1)(a_u th_r - 1)
    + th_i^2 a_l a_u] sin(psi)`` with ``a = k/boundary`` and
    ``psi = th_i log(U/L)``.
    """
    gap = merton(params, sigma)[1] - delta0
    pi_m, pi_p, lower, upper = _band_from_gap(params, sigma, gap)
    th = theta_roots(params, sigma, delta0)
    g = params.gamma
    if case == Case.REAL:
        tp, tm = th.theta_plus.real, th.theta_minus.real
        # divide through by U^dth so both terms stay O(1)
        r = (lower / upper) ** (tp - tm)
        t1 = (tp / pi_m + tm / pi_p - (1 - 2 * g)) * r
        t2 = tp / pi_p + tm / pi_m - (1 - 2 * g)
        return abs(t1 - t2) / (abs(t1) + abs(t2))
    a_l = 1.0 / ((1 - g) * pi_m)
    a_u = 1.0 / ((1 - g) * pi_p)
    psi = th.theta_i * np.log(upper / lower)
    t1 = th.theta_i * (a_l - a_u) * np.cos(psi)
    t2 = ((a_l * th.theta_r - 1) * (a_u * th.theta_r - 1) + th.theta_i**2 * a_l * a_u) * np.sin(psi)
    return abs(t1 + t2) / (abs(t1) + abs(t2))


def scan_determinant(params, sigma, n_scan=200):
    """Sample the boundary determinant on a geometric grid of gaps ``delta_max - Delta``.

    Geometric spacing resolves eigenvalues that sit within ``O(lambda^(2/3))``
    of ``delta_max``. Returns ``(gaps, values)`` with gaps decreasing.
    """
    pi_m, delta_max = merton(params, sigma)
    delta_lo = max(0.0, params.mu - 0.5 * params.gamma * sigma**2)
    gap_hi = (delta_max - delta_lo) * (1 - 1e-9)
    gap_lo = delta_max * 1e-15
    if not gap_hi > gap_lo:
        raise DomainError(f"Merton proportion {pi_m!r} is numerically one; no interior band")
    gaps = np.geomspace(gap_hi, gap_lo, n_scan)
    values = np.array([_boundary_determinant(params, sigma, d) for d in gaps])
    return gaps, values


def solve_zeroth(params, sigma, n_scan=200):
    """Solve for ``(Delta0, L0, U0, v0)`` by scan-then-bracketed root search.

    All sign changes of the determinant on ``(0, delta_max)`` are located; the
    largest eigenvalue is returned and the full list kept in ``eigenvalues``.
    """
    pi_merton, delta_max = merton(params, sigma)
    params.check_merton_bound(sigma)
    if params.lam == 0:
        raise CollapsedBandError(pi_merton, delta_max)

    gaps, values = scan_determinant(params, sigma, n_scan)
    ok = np.isfinite(values)
    roots = []
    for i in range(len(gaps) - 1):
        if ok[i] and ok[i + 1] and np.sign(values[i]) != np.sign(values[i + 1]):
            d = brentq(lambda x: _boundary_determinant(params, sigma, x),
                       gaps[i + 1], gaps[i], xtol=1e-300, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
            roots.append(d)
    if not roots:
        raise EigenvalueNotFoundError(
            f"no sign change of the boundary determinant on (0, delta_max) for "
            f"{params} at sigma={sigma}",
            profile=list(zip((delta_max - gaps).tolist(), values.tolist())),
        )
    gap = min(roots)
    eigenvalues = tuple(sorted(delta_max - d for d in roots))
    return _assemble(params, sigma, gap, eigenvalues, len(roots))


def _assemble(params, sigma, gap, eigenvalues=(), n_changes=1):
    pi_merton, delta_max = merton(params, sigma)
    delta0 = delta_max - gap
    pi_m, pi_p, lower, upper = _band_from_gap(params, sigma, gap)
    g, lam = params.gamma, params.lam
    th = theta_roots(params, sigma, delta0)
    if th.is_real and abs(th.theta_plus - th.theta_minus) < THETA_GAP_GUARD:
        raise EigenvalueNotFoundError(
            f"repeated root theta+ = theta- = {th.theta_plus.real} at the eigenvalue; "
            "the no-trade band would be degenerate")
    k = params.mu / (0.5 * sigma**2)
    k_l = (1 + lower) / (1 - g)
    k_u = (1 / (1 - lam) + upper) / (1 - g)
    if th.is_real:
        vp, vm = QuasiPoly.power(th.theta_plus.real), QuasiPoly.power(th.theta_minus.real)
    else:
        vp, vm = QuasiPoly.power(th.theta_plus), QuasiPoly.power(th.theta_plus, coef=-1j)
    c_plus = float(vm(lower) - k_l * vm(lower, 1))
    c_minus = float(-(vp(lower) - k_l * vp(lower, 1)))
    return ZerothOrderSolution(
        params=params, sigma=float(sigma), Delta0=float(delta0), gap=float(gap),
        pi_minus=float(pi_m), pi_plus=float(pi_p), L0=float(lower), U0=float(upper),
        theta=th, c_plus=c_plus, c_minus=c_minus, k=float(k), k_l=float(k_l), k_u=float(k_u),
        k_minus=float((1 - g) * pi_m + k - 2), k_plus=float((1 - g) * pi_p + k - 2),
        case=Case.REAL if th.is_real else Case.COMPLEX,
        eigenvalues=tuple(float(e) for e in eigenvalues) or (float(delta0),),
        scan_sign_changes=n_changes,
        metadata={"eigenvalue_selection": "largest bracketed root"},
    )


def eval_v0(sol, zeta, order=0):
    """``v0`` or one of its first three ``zeta``-derivatives."""
    if not 0 <= order <= 3:
        raise ValueError("order must be 0..3")
    if np.any(np.asarray(zeta) <= 0):
        raise DomainError("v0 is defined for zeta > 0")
    return sol.v0(zeta, order)


def eval_w(sol, zeta, order=0):
    """Adjoint eigenfunction on the no-trade band ``[L0, U0]``."""
    z = np.asarray(zeta, dtype=float)
    tol = 1e-12 * sol.U0
    if np.any(z < sol.L0 - tol) or np.any(z > sol.U0 + tol):
        raise DomainError(f"w is defined on [L0, U0] = [{sol.L0}, {sol.U0}]")
    return sol.w(z, order)


def gap_diagnostic(params, sigma, delta0):
    """``lambda_tilde = sqrt(mu^2 - 2 gamma sigma^2 Delta0)`` and its small-cost coefficient.

    The coefficient is ``gamma sigma^2 (3/(4 gamma) pi_M^2 (1 - pi_M)^2)^(1/3)``
    so that ``lambda_tilde ~ coefficient * lambda^(1/3)``.
    """
    pi_m, delta_max = merton(params, sigma)
    if delta0 > delta_max:
        raise DomainError(f"Delta0={delta0} exceeds delta_max={delta_max}")
    lam_t = np.sqrt(max(params.mu**2 - 2 * params.gamma * sigma**2 * delta0, 0.0))
    coeff = params.gamma * sigma**2 * (3 / (4 * params.gamma) * pi_m**2 * (1 - pi_m) ** 2) ** (1 / 3)
    return float(lam_t), float(coeff)
