"""Monte Carlo estimate of the long-term certainty-equivalent growth rate.

Paths of (cash X, stock Y, factor Z) are stepped in discounted units (r = 0)
under a band-reflection policy; ``r`` is added back to the reported rate.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .exceptions import DomainError
from .model import FAST


def liquidation_value(x, y, lam):
    """Wealth after closing the stock position; sales pay the proportional cost."""
    return x + y - lam * np.maximum(y, 0.0)


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.

    ``policy`` is ``(l, u)``; each entry is a constant or a map of ``z``.
    Maps are tabulated on ``n_grid`` points across the factor's range.
    ``coarsen = k`` builds each step from ``k`` normals of the same seed's
    ``dt/k`` stream, so runs at ``dt`` and ``dt/k`` share Brownian paths.
    """

    params: object
    model: object
    policy: tuple
    T: float = 50.0
    dt: float = 1 / 2500
    n_paths: int = 10_000
    seed: int = 0
    batch_count: int = 20
    n_grid: int = 2001
    workers: int = 0
    coarsen: int = 1

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise DomainError("T and dt must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise DomainError(f"T/dt must be an integer number of steps, got {steps}")
        if self.n_paths < self.batch_count or self.batch_count < 2:
            raise DomainError("need at least two batches and one path per batch")
        if self.coarsen < 1 or 512 % self.coarsen:
            raise DomainError("coarsen must be a positive divisor of 512")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class SimResult:
    growth_rate_estimate: float
    standard_error: float
    mean_trade_volume: float
    fraction_time_at_boundaries: float
    paths_bankrupt: int
    batch_rates: np.ndarray = field(repr=False)
    n_paths: int = 0
    n_steps: int = 0

    def to_dict(self):
        return {"growth_rate_estimate": self.growth_rate_estimate,
                "standard_error": self.standard_error,
                "mean_trade_volume": self.mean_trade_volume,
                "fraction_time_at_boundaries": self.fraction_time_at_boundaries,
                "paths_bankrupt": self.paths_bankrupt, "n_paths": self.n_paths,
                "n_steps": self.n_steps, "batch_rates": [float(b) for b in self.batch_rates]}


@njit(cache=True, nogil=True)
def _interp(z, z0, inv_dz, table):
    x = (z - z0) * inv_dz
    n = table.shape[0] - 1
    if x <= 0.0:
        return table[0]
    if x >= n:
        return table[n]
    i = int(x)
    w = x - i
    return table[i] * (1.0 - w) + table[i + 1] * w


@njit(cache=True, nogil=True)
def rebalance(x, y, lo, hi, lam):
    """Trade to the nearest band edge; returns ``(x, y, traded amount)``.

    Buying ``d = (lo x - y)/(1 + lo)`` lands on ``y/x = lo``; selling
    ``d = (y - hi x)/(1 + hi(1 - lam))`` lands on ``y/x = hi`` after the cost.
    """
    if y < lo * x:
        d = (lo * x - y) / (1.0 + lo)
        return x - d, y + d, d
    if y > hi * x:
        d = (y - hi * x) / (1.0 + hi * (1.0 - lam))
        return x + (1.0 - lam) * d, y - d, d
    return x, y, 0.0


@njit(cache=True, nogil=True)
def _advance(x, y, z, vol, trades, bankrupt, shocks, dt, mu, lam, z0, inv_dz, f_tab,
             a_tab, b_tab, l_tab, u_tab, exact, decay, ou_sd, z_mean, rate_scale,
             noise_scale, corr):
    """Advance every path through one block of steps; ``shocks`` is (paths, steps, 2)."""
    sdt = np.sqrt(dt)
    ortho = np.sqrt(max(1.0 - corr * corr, 0.0))
    for p in range(x.shape[0]):
        if bankrupt[p]:
            continue
        xp, yp, zp = x[p], y[p], z[p]
        for k in range(shocks.shape[1]):
            s = _interp(zp, z0, inv_dz, f_tab)
            e1 = shocks[p, k, 0]
            e2 = corr * e1 + ortho * shocks[p, k, 1]
            yp *= np.exp((mu - 0.5 * s * s) * dt + s * sdt * e1)
            if exact:
                zp = z_mean + (zp - z_mean) * decay + ou_sd * e2
            else:
                zp += (rate_scale * _interp(zp, z0, inv_dz, a_tab) * dt
                       + noise_scale * _interp(zp, z0, inv_dz, b_tab) * sdt * e2)
            lo = _interp(zp, z0, inv_dz, l_tab)
            hi = _interp(zp, z0, inv_dz, u_tab)
            xp, yp, d = rebalance(xp, yp, lo, hi, lam)
            if d > 0.0:
                vol[p] += d
                trades[p] += 1
            if xp + (1.0 - lam) * yp <= 0.0 or xp <= 0.0:
                bankrupt[p] = 1
                break
        x[p], y[p], z[p] = xp, yp, zp


def _run_batch(seq, n_paths, cfg, tabs, dyn, zeta_init, block=512):
    rng = np.random.default_rng(seq)
    grid, z0, inv_dz, f_tab, a_tab, b_tab, l_tab, u_tab = tabs
    z = dyn["z_mean"] + dyn["z_std"] * rng.standard_normal(n_paths)
    lo, hi = np.interp(z, grid, l_tab), np.interp(z, grid, u_tab)
    zeta = np.minimum(np.maximum(zeta_init, lo), hi)
    x, y = 1.0 / (1.0 + zeta), zeta / (1.0 + zeta)
    vol, trades = np.zeros(n_paths), np.zeros(n_paths)
    bankrupt = np.zeros(n_paths, dtype=np.int64)
    decay = float(np.exp(-dyn["kappa"] * cfg.dt))
    ou_sd = float(dyn["z_std"] * np.sqrt(1.0 - decay**2))
    c = cfg.coarsen
    block //= c
    done = 0
    while done < cfg.n_steps:
        k = min(block, cfg.n_steps - done)
        shocks = rng.standard_normal((n_paths, k * c, 2))
        if c > 1:
            shocks = shocks.reshape(n_paths, k, c, 2).sum(axis=2) / np.sqrt(c)
        _advance(x, y, z, vol, trades, bankrupt, shocks, cfg.dt, cfg.params.mu, cfg.params.lam,
                 z0, inv_dz, f_tab, a_tab, b_tab, l_tab, u_tab, dyn["exact"], decay, ou_sd,
                 dyn["z_mean"], dyn["rate_scale"], dyn["noise_scale"], dyn["corr"])
        done += k
    wealth = liquidation_value(x, y, cfg.params.lam)
    return wealth, vol, trades, bankrupt


def _z_grid(model, n):
    if model.gaussian is not None:
        m, s = model.gaussian
        return np.linspace(m - 12 * s, m + 12 * s, n)
    lo, hi = model.support
    return np.linspace(lo, hi, n)


def _tabulate(fn, grid):
    if callable(fn):
        return np.array([float(fn(z)) for z in grid])
    return np.full(grid.shape, float(fn))


def _factor_dynamics(model, dt):
    """Scalars for the factor step, in the time scale of the regime."""
    scale = 1.0 / model.epsilon if model.regime == FAST else model.epsilon
    if model.gaussian is not None:
        m, s = model.gaussian
        # alpha = m - z, beta = s sqrt(2): exact OU step with rate ``scale``
        kappa = scale
        decay = np.exp(-kappa * dt)
        # correlation between the stock increment W_dt and the OU innovation
        cov = model.rho * s * np.sqrt(2 * kappa) * (1 - decay) / kappa
        corr = cov / (np.sqrt(dt) * s * np.sqrt(1 - decay**2))
        return dict(exact=True, kappa=kappa, z_mean=m, z_std=s, rate_scale=scale,
                    noise_scale=np.sqrt(scale), corr=float(np.clip(corr, -1, 1)))
    # non-Gaussian factors start at the centre of their support
    lo, hi = model.support
    return dict(exact=False, kappa=0.0, z_mean=0.5 * (lo + hi), z_std=0.0, rate_scale=scale,
                noise_scale=np.sqrt(scale), corr=model.rho)


def simulate_growth(cfg):
    """Certainty-equivalent growth rate with batch-means standard error."""
    p, model = cfg.params, cfg.model
    grid = _z_grid(model, cfg.n_grid)
    f_tab = np.asarray(model.f(grid), dtype=float) * np.ones_like(grid)
    a_tab = np.asarray(model.alpha(grid), dtype=float) * np.ones_like(grid)
    b_tab = np.asarray(model.beta(grid), dtype=float) * np.ones_like(grid)
    l_fn, u_fn = cfg.policy
    l_tab, u_tab = _tabulate(l_fn, grid), _tabulate(u_fn, grid)
    if np.any(l_tab >= u_tab):
        raise DomainError("policy needs l(z) < u(z) on the whole factor range")
    if np.any(l_tab <= -1) or np.any(u_tab <= -1 / (1 - p.lam)):
        raise DomainError("policy band leaves the solvency region")
    dyn = _factor_dynamics(model, cfg.dt)
    s_bar = float(np.sqrt(np.mean(f_tab**2)))
    pm = p.mu / (p.gamma * s_bar**2)
    zeta_init = pm / (1 - pm) if pm < 1 else float(np.median(u_tab))

    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.batch_count)
    sizes = np.full(cfg.batch_count, cfg.n_paths // cfg.batch_count)
    sizes[: cfg.n_paths % cfg.batch_count] += 1
    z0, inv_dz = float(grid[0]), float((len(grid) - 1) / (grid[-1] - grid[0]))
    tabs = (grid, z0, inv_dz, f_tab, a_tab, b_tab, l_tab, u_tab)

    def run(b):
        return _run_batch(seqs[b], int(sizes[b]), cfg, tabs, dyn, zeta_init)

    workers = cfg.workers or min(cfg.batch_count, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        out = list(pool.map(run, range(cfg.batch_count)))

    g = p.gamma
    bankrupt = int(sum(o[3].sum() for o in out))
    if bankrupt:
        raise DomainError(f"{bankrupt} paths left the solvency region; the band is not admissible")

    def rate(w):
        # U^{-1}(mean U(W)) with U(w) = w^(1-g)/(1-g); work in logs for range
        lw = (1 - g) * np.log(w)
        top = lw.max()
        log_mean = top + np.log(np.mean(np.exp(lw - top)))
        return log_mean / ((1 - g) * cfg.T)

    batch_rates = np.array([rate(o[0]) for o in out])
    all_w = np.concatenate([o[0] for o in out])
    est = rate(all_w) + p.r
    se = float(np.std(batch_rates, ddof=1) / np.sqrt(cfg.batch_count))
    volume = float(np.mean(np.concatenate([o[1] for o in out])) / cfg.T)
    frac = float(np.mean(np.concatenate([o[2] for o in out])) / cfg.n_steps)
    return SimResult(growth_rate_estimate=float(est), standard_error=se, mean_trade_volume=volume,
                     fraction_time_at_boundaries=frac, paths_bankrupt=bankrupt,
                     batch_rates=batch_rates + p.r, n_paths=cfg.n_paths, n_steps=cfg.n_steps)
