"""Market constants, the volatility factor model and its ergodic machinery."""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import expit

from .exceptions import DomainError, ErgodicityError

FAST = "fast"
SLOW = "slow"


@dataclass(frozen=True)
class MarketParams:
    """Investor and market constants.

    ``mu`` is the excess drift of the stock over the money market, ``r`` the
    risk-free rate, ``gamma`` the relative risk aversion and ``lam`` the
    proportional cost charged on sales.
    """

    mu: float
    r: float = 0.0
    gamma: float = 2.0
    lam: float = 0.01

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not self.gamma > 0 or self.gamma == 1:
            raise DomainError(f"gamma must be positive and != 1, got {self.gamma}")
        if not 0 <= self.lam < 1:
            raise DomainError(f"lambda must lie in [0, 1), got {self.lam}")
        if not self.r >= 0:
            raise DomainError(f"r must be non-negative, got {self.r}")

    def merton_proportion(self, sigma):
        return self.mu / (self.gamma * sigma**2)

    def check_merton_bound(self, sigma):
        """Raise unless the Merton proportion at ``sigma`` is below one."""
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        pi_m = self.merton_proportion(sigma)
        if not pi_m < 1:
            raise DomainError(
                f"Merton proportion mu/(gamma sigma^2) = {pi_m:.6g} must be < 1 "
                f"(mu={self.mu}, gamma={self.gamma}, sigma={sigma})"
            )
        return pi_m

    def replace(self, **changes):
        values = dict(mu=self.mu, r=self.r, gamma=self.gamma, lam=self.lam)
        values.update(changes)
        return MarketParams(**values)

    def to_dict(self):
        return {"mu": self.mu, "r": self.r, "gamma": self.gamma, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d):
        lam = d.get("lambda", d.get("lam"))
        return cls(mu=float(d["mu"]), r=float(d.get("r", 0.0)),
                   gamma=float(d["gamma"]), lam=float(lam))


@dataclass(frozen=True)
class VolFactorModel:
    """Stochastic volatility ``f(Z)`` driven by the diffusion ``dZ = alpha dt + beta dW``.

    In the fast regime the generator of ``Z`` is scaled by ``1/epsilon``; in
    the slow regime by ``epsilon``. ``gaussian`` holds ``(mean, std)`` of the
    invariant law when it is normal (OU factor), which enables Gauss-Hermite
    quadrature. ``support`` bounds the factor for non-Gaussian models.
    """

    f: Callable
    alpha: Callable
    beta: Callable
    rho: float = 0.0
    epsilon: float = 1e-3
    regime: str = FAST
    f_prime: Optional[Callable] = None
    gaussian: Optional[tuple] = None
    support: Optional[tuple] = None
    sigma_bounds: Optional[tuple] = None
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise DomainError(f"rho must lie in (-1, 1), got {self.rho}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.regime not in (FAST, SLOW):
            raise DomainError(f"regime must be 'fast' or 'slow', got {self.regime!r}")
        if self.gaussian is None and self.support is None:
            raise DomainError("non-Gaussian factor models need an explicit support")

    def with_rho(self, rho):
        return _replace(self, rho=rho, description={**self.description, "rho": rho})

    def df(self, z):
        """``f'(z)``: analytic when the family provides it, else central difference."""
        if self.f_prime is not None:
            return self.f_prime(z)
        h = 1e-6 * max(1.0, abs(z))
        return (self.f(z + h) - self.f(z - h)) / (2 * h)

    def to_dict(self):
        return dict(self.description)


def _replace(model, **changes):
    from dataclasses import replace

    return replace(model, **changes)


def ou_logistic_model(m=0.0, nu=1.0, sigma_lo=0.1, sigma_hi=0.3, rho=0.0,
                      epsilon=1e-3, regime=FAST, steepness=1.0, center=0.0):
    """OU factor with a logistic volatility map between ``sigma_lo`` and ``sigma_hi``.

    ``alpha(z) = m - z``, ``beta = nu*sqrt(2)``, so the invariant law is
    N(m, nu**2) and ``f(z) = sigma_lo + (sigma_hi - sigma_lo) * expit(steepness*(z - center))``.
    """
    if not 0 < sigma_lo <= sigma_hi:
        raise DomainError("need 0 < sigma_lo <= sigma_hi")
    if not nu > 0:
        raise DomainError("nu must be positive")
    span = sigma_hi - sigma_lo
    b = nu * np.sqrt(2.0)

    def f(z):
        return sigma_lo + span * expit(steepness * (np.asarray(z) - center))

    def f_prime(z):
        e = expit(steepness * (np.asarray(z) - center))
        return span * steepness * e * (1.0 - e)

    def alpha(z):
        return m - np.asarray(z, dtype=float)

    def beta(z):
        return b + 0.0 * np.asarray(z, dtype=float)

    desc = dict(family="ou_logistic", m=m, nu=nu, sigma_lo=sigma_lo, sigma_hi=sigma_hi,
                rho=rho, epsilon=epsilon, regime=regime, steepness=steepness, center=center)
    return VolFactorModel(f=f, alpha=alpha, beta=beta, rho=rho, epsilon=epsilon, regime=regime,
                          f_prime=f_prime, gaussian=(m, nu), sigma_bounds=(sigma_lo, sigma_hi),
                          description=desc)


def constant_vol_model(sigma, m=0.0, nu=1.0, rho=0.0, epsilon=1e-3, regime=FAST):
    """OU factor driving a constant volatility: every correction vanishes."""
    return ou_logistic_model(m=m, nu=nu, sigma_lo=sigma, sigma_hi=sigma, rho=rho,
                             epsilon=epsilon, regime=regime)


def tabulated_model(table, rho=0.0, epsilon=1e-3, regime=FAST):
    """Factor model from rows ``(z, f, alpha, beta)``, cubic-interpolated in ``z``."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 4 or table.shape[0] < 4:
        raise DomainError("tabulated model needs at least 4 rows of (z, f, alpha, beta)")
    order = np.argsort(table[:, 0])
    z, fv, av, bv = table[order].T
    if np.any(fv <= 0) or np.any(bv <= 0):
        raise DomainError("tabulated f and beta must be strictly positive")
    f_s, a_s, b_s = CubicSpline(z, fv), CubicSpline(z, av), CubicSpline(z, bv)
    desc = dict(tabulated=table[order].tolist(), rho=rho, epsilon=epsilon, regime=regime)
    return VolFactorModel(f=f_s, alpha=a_s, beta=b_s, rho=rho, epsilon=epsilon, regime=regime,
                          support=(float(z[0]), float(z[-1])),
                          sigma_bounds=(float(fv.min()), float(fv.max())), description=desc)


def model_from_dict(d):
    """Build a model from its JSON description (family form or tabulated form)."""
    common = dict(rho=float(d.get("rho", 0.0)), epsilon=float(d.get("epsilon", 1e-3)),
                  regime=str(d.get("regime", FAST)).lower())
    if "tabulated" in d:
        return tabulated_model(d["tabulated"], **common)
    family = d.get("family", "ou_logistic")
    if family != "ou_logistic":
        raise DomainError(f"unknown factor model family {family!r}")
    return ou_logistic_model(m=float(d.get("m", 0.0)), nu=float(d.get("nu", 1.0)),
                             sigma_lo=float(d["sigma_lo"]), sigma_hi=float(d["sigma_hi"]),
                             steepness=float(d.get("steepness", 1.0)),
                             center=float(d.get("center", 0.0)), **common)


def model_from_json(text):
    return model_from_dict(json.loads(text))


@dataclass(frozen=True)
class InvariantDistribution:
    """Normalized invariant density of the factor with a quadrature rule."""

    log_density: Callable
    nodes: np.ndarray
    weights: np.ndarray
    support: tuple
    mean: float
    std: float
    integration_range: tuple = None

    def density(self, z):
        return np.exp(self.log_density(z))

    @property
    def quadrature_nodes(self):
        return list(zip(self.nodes.tolist(), self.weights.tolist()))


def invariant_distribution(model, n_nodes=64):
    """Invariant law of the factor.

    Gauss-Hermite nodes when the law is Gaussian; otherwise the density
    ``exp(int 2 alpha/beta^2) / beta^2`` is built on a grid and integrated with
    the trapezoid rule, refined until the normalization settles.
    """
    if n_nodes < 8:
        raise ValueError("n_nodes must be at least 8")
    if model.gaussian is not None:
        mean, std = map(float, model.gaussian)
        x, w = hermegauss(n_nodes)
        w = w / w.sum()

        def log_density(z):
            u = (np.asarray(z, dtype=float) - mean) / std
            return -0.5 * u**2 - np.log(std * np.sqrt(2 * np.pi))

        lo, hi = mean + std * x[0], mean + std * x[-1]
        return InvariantDistribution(log_density, mean + std * x, w, (lo, hi), mean, std,
                                     (mean - 40 * std, mean + 40 * std))
    return _grid_distribution(model, n_nodes)


def _grid_distribution(model, n_nodes):
    a, b = map(float, model.support)
    n = max(n_nodes, 257)
    prev = None
    for _ in range(12):
        z = np.linspace(a, b, n)
        drift = 2 * model.alpha(z) / model.beta(z) ** 2
        logd = integrate.cumulative_simpson(drift, x=z, initial=0.0) - 2 * np.log(model.beta(z))
        logd -= logd.max()
        dens = np.exp(logd)
        mass = integrate.trapezoid(dens, z)
        if prev is not None and abs(mass - prev) <= 1e-13 * mass:
            break
        prev = mass
        n = 2 * n - 1
    if not np.isfinite(mass) or mass <= 0:
        raise ErgodicityError("invariant density is not normalizable")
    if dens[0] > 1e-10 or dens[-1] > 1e-10:
        raise ErgodicityError(
            "invariant density does not decay inside the support "
            f"(edge values {dens[0]:.3g}, {dens[-1]:.3g}); factor not ergodic on it"
        )
    logd -= np.log(mass)
    w = np.full(n, z[1] - z[0])
    w[0] = w[-1] = 0.5 * (z[1] - z[0])
    w = w * np.exp(logd)
    w /= w.sum()
    mean = float(np.dot(w, z))
    std = float(np.sqrt(np.dot(w, (z - mean) ** 2)))
    spline = CubicSpline(z, logd)
    return InvariantDistribution(spline, z, w, (a, b), mean, std, (a, b))


def ergodic_average(g, dist):
    """``<g>`` under the invariant law."""
    return float(np.dot(dist.weights, g(dist.nodes)))


def sigma_bar(model, dist):
    """Root-mean-square volatility ``sqrt(<f^2>)``."""
    return float(np.sqrt(ergodic_average(lambda z: model.f(z) ** 2, dist)))


def poisson_derivative(source, dist, beta):
    """Derivative of the solution of ``L0 phi = source`` for a centered source.

    Uses ``phi'(z) = 2/(beta^2 Phi) * int_{-inf}^z source * Phi``; above the
    mean the equivalent upper-tail form ``-int_z^inf`` is used for stability.
    Only defined on the quadrature support.
    """
    lo, hi = dist.support
    left, right = dist.integration_range

    def one(z):
        if not lo - 1e-12 <= z <= hi + 1e-12:
            raise DomainError(f"phi' requested at z={z} outside quadrature support [{lo}, {hi}]")
        ld = float(dist.log_density(z))

        def integrand(u):
            return source(u) * np.exp(dist.log_density(u) - ld)

        if z <= dist.mean:
            val, _ = integrate.quad(integrand, left, z, epsabs=1e-15, epsrel=1e-13, limit=200)
        else:
            val, _ = integrate.quad(integrand, z, right, epsabs=1e-15, epsrel=1e-13, limit=200)
            val = -val
        return 2.0 * val / float(beta(z)) ** 2

    def phi_p(z):
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            return one(float(z))
        return np.array([one(float(x)) for x in z.ravel()]).reshape(z.shape)

    return phi_p


def phi_prime(model, dist):
    """``phi'`` where ``L0 phi = f^2 - sigma_bar^2``."""
    sb2 = sigma_bar(model, dist) ** 2

    def source(u):
        return model.f(u) ** 2 - sb2

    return poisson_derivative(source, dist, model.beta)


def v3(model, dist, phi=None):
    """Fast-scale group parameter ``V3 = -rho/2 <beta f phi'>``."""
    if model.rho == 0.0:
        return 0.0
    if model.sigma_bounds is not None and model.sigma_bounds[0] == model.sigma_bounds[1]:
        return 0.0
    phi = phi if phi is not None else phi_prime(model, dist)
    z = dist.nodes
    vals = model.beta(z) * model.f(z) * phi(z)
    return -0.5 * model.rho * float(np.dot(dist.weights, vals))


def v1_slow(model, z):
    """Slow-scale group parameter ``V1(z) = rho f(z) f'(z) beta(z)``."""
    return float(model.rho * model.f(z) * model.df(z) * model.beta(z))
