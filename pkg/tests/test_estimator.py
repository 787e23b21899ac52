import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tcvol import FastScaleBand, SlowScaleBand
from tcvol.constvol import solve_zeroth
from tcvol.fastscale import fast_correction
from tcvol.model import MarketParams


def test_params_roundtrip():
    est = FastScaleBand(mu=0.05, V3=-1.0)
    assert est.get_params()["mu"] == 0.05
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(gamma=3.0)
    assert c.gamma == 3.0 and est.gamma == 2.0


def test_fast_fit_matches_functional_core():
    est = FastScaleBand(mu=0.07, sigma_lo=0.2, sigma_hi=0.2, V3=-1.0, epsilon=1e-6).fit()
    sol = solve_zeroth(MarketParams(mu=0.07), 0.2)
    corr = fast_correction(sol, -1.0)
    assert est.sigma_bar_ == pytest.approx(0.2, rel=1e-12)
    assert est.delta1_ == pytest.approx(corr.delta1, rel=1e-10)
    band = est.predict(np.zeros((4, 1)))
    assert band.shape == (4, 2)
    np.testing.assert_allclose(band[0], (sol.L0 + 1e-3 * corr.l1, sol.U0 + 1e-3 * corr.u1))
    assert est.growth_rate_ == pytest.approx(sol.Delta0 + 1e-3 * corr.delta1)


def test_fast_default_model_v3_sign():
    est = FastScaleBand(mu=0.07, sigma_lo=0.19, sigma_hi=0.21, rho=-0.5).fit()
    assert est.V3_ < 0
    assert est.l1_ < 0 and est.u1_ < 0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        FastScaleBand().predict([0.0])
    with pytest.raises(NotFittedError):
        SlowScaleBand().predict([0.0])


def test_slow_predict_shapes_and_cache():
    est = SlowScaleBand(mu=0.07, sigma_lo=0.19, sigma_hi=0.2, epsilon=1e-4).fit()
    z = np.array([-0.5, 0.0, 0.5])
    band = est.predict(z)
    assert band.shape == (3, 2)
    assert np.all(band[:, 0] < band[:, 1])
    rates = est.growth_rate(z.reshape(-1, 1))
    assert rates.shape == (3,)
    assert len(est.cache_) == 3
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 2)))
