"""No-trade bands and long-term growth under proportional costs and stochastic volatility."""

__version__ = "0.1.0"

from .constvol import (Case, ZerothOrderSolution, classify_case, eval_v0, eval_w,
                       gap_diagnostic, merton, solve_zeroth)
from .exceptions import (CollapsedBandError, ConsistencyError, DegenerateBoundaryError,
                         DomainError, EigenvalueNotFoundError, ErgodicityError,
                         UnsupportedCaseError)
from .fastscale import FastCorrection, boundary_corrections_fast, delta1_fast, eval_v1, v1_fast
from .model import (InvariantDistribution, MarketParams, VolFactorModel, constant_vol_model,
                    ergodic_average, invariant_distribution, ou_logistic_model, phi_prime,
                    sigma_bar, tabulated_model, v1_slow, v3)
from .slowscale import (SlowCorrection, VegaBlock, boundary_corrections_slow, delta1_slow,
                        delta_prime, slow_correction, slow_correction_at, v1_slow_coeffs,
                        vega_block)
from .simulate import SimConfig, SimResult, liquidation_value, simulate_growth
from .estimator import FastScaleBand, SlowScaleBand
