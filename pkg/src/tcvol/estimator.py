"""Estimator-style facade over the functional solvers.

``fit`` solves the zeroth-order problem and the first-order correction and
stores the results in trailing-underscore attributes; ``predict(z)``
returns the corrected band ``[l, u]`` at factor levels ``z``. The
hyperparameters are the market constants and the OU-logistic factor model,
so ``get_params``/``set_params``/``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .constvol import solve_zeroth
from .fastscale import fast_correction
from .model import (FAST, SLOW, MarketParams, invariant_distribution, ou_logistic_model,
                    sigma_bar, v1_slow, v3)
from .slowscale import slow_correction_at


class _BandBase(BaseEstimator):
    def __init__(self, mu=0.07, r=0.0, gamma=2.0, lam=0.01, epsilon=1e-3, rho=-0.5,
                 m=0.0, nu=1.0, sigma_lo=0.1, sigma_hi=0.3, steepness=1.0, center=0.0):
        self.mu = mu
        self.r = r
        self.gamma = gamma
        self.lam = lam
        self.epsilon = epsilon
        self.rho = rho
        self.m = m
        self.nu = nu
        self.sigma_lo = sigma_lo
        self.sigma_hi = sigma_hi
        self.steepness = steepness
        self.center = center

    def _market(self):
        return MarketParams(mu=self.mu, r=self.r, gamma=self.gamma, lam=self.lam)

    def _model(self, regime):
        return ou_logistic_model(m=self.m, nu=self.nu, sigma_lo=self.sigma_lo,
                                 sigma_hi=self.sigma_hi, rho=self.rho, epsilon=self.epsilon,
                                 regime=regime, steepness=self.steepness, center=self.center)

    @staticmethod
    def _levels(X):
        z = np.asarray(X, dtype=float)
        if z.ndim == 2:
            if z.shape[1] != 1:
                raise ValueError("predict expects a single column of factor levels")
            z = z[:, 0]
        return np.atleast_1d(z)


class FastScaleBand(_BandBase):
    """Band under fast mean-reverting volatility; the shift does not depend on ``z``.

    ``V3`` overrides the value computed from the factor model when given.
    """

    def __init__(self, mu=0.07, r=0.0, gamma=2.0, lam=0.01, epsilon=1e-3, rho=-0.5,
                 m=0.0, nu=1.0, sigma_lo=0.1, sigma_hi=0.3, steepness=1.0, center=0.0,
                 V3=None):
        super().__init__(mu=mu, r=r, gamma=gamma, lam=lam, epsilon=epsilon, rho=rho, m=m,
                         nu=nu, sigma_lo=sigma_lo, sigma_hi=sigma_hi, steepness=steepness,
                         center=center)
        self.V3 = V3

    def fit(self, X=None, y=None):
        model = self._model(FAST)
        dist = invariant_distribution(model)
        self.sigma_bar_ = sigma_bar(model, dist)
        self.V3_ = v3(model, dist) if self.V3 is None else float(self.V3)
        self.solution_ = solve_zeroth(self._market(), self.sigma_bar_)
        self.correction_ = fast_correction(self.solution_, self.V3_)
        s = np.sqrt(self.epsilon)
        self.Delta0_ = self.solution_.Delta0
        self.delta1_ = self.correction_.delta1
        self.L0_, self.U0_ = self.solution_.L0, self.solution_.U0
        self.l1_, self.u1_ = self.correction_.l1, self.correction_.u1
        self.growth_rate_ = self.r + self.Delta0_ + s * self.delta1_
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        z = self._levels(X)
        lo, hi = self.correction_.corrected_band(self.solution_, self.epsilon)
        return np.column_stack([np.full(z.shape, lo), np.full(z.shape, hi)])


class SlowScaleBand(_BandBase):
    """Band under slowly varying volatility, frozen at each factor level ``z``.

    ``fit`` only validates the model; the correction is solved per level in
    ``predict`` since every quantity depends on ``f(z)`` and ``V1(z)``.
    """

    def fit(self, X=None, y=None):
        self.model_ = self._model(SLOW)
        self.params_ = self._market()
        self.cache_ = {}
        return self

    def correction(self, z):
        check_is_fitted(self, "model_")
        z = float(z)
        if z not in self.cache_:
            sigma = float(self.model_.f(z))
            V1 = v1_slow(self.model_, z)
            self.cache_[z] = slow_correction_at(self.params_, sigma, V1, z=z)
        return self.cache_[z]

    def predict(self, X):
        z = self._levels(X)
        return np.array([self.correction(v).corrected_band(self.epsilon) for v in z])

    def growth_rate(self, X):
        z = self._levels(X)
        return np.array([self.r + self.correction(v).corrected_rate(self.epsilon) for v in z])
