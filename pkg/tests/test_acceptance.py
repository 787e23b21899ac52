"""Acceptance criteria 1-11, one test each.

Every test records a PASS/FAIL line (printed immediately and repeated in the
terminal summary) before asserting.
"""

import json
import time

import numpy as np
import pytest

from tcvol import cli, oracles
from tcvol.constvol import classify_case, gap_diagnostic, solve_zeroth
from tcvol.estimator import FastScaleBand
from tcvol.fastscale import fast_correction
from tcvol.model import (MarketParams, constant_vol_model, invariant_distribution,
                         ou_logistic_model, sigma_bar, v1_slow, v3)
from tcvol.simulate import SimConfig, simulate_growth
from tcvol.slowscale import (delta_prime, slow_correction_at, vega_block, vega_fd,
                             vega_function)

REAL = MarketParams(mu=0.07, gamma=2.0, lam=0.01)
COMPLEX = MarketParams(mu=0.05, gamma=2.0, lam=0.01)
SIGMA = 0.2

RESULTS = []


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def interior(sol, n=100):
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    return 0.5 * (sol.L0 + sol.U0) + 0.5 * (sol.U0 - sol.L0) * x


def test_c01_merton_collapse():
    t = time.perf_counter()
    p = MarketParams(mu=0.07, gamma=2.0, lam=1e-8)
    s = solve_zeroth(p, SIGMA)
    dt = time.perf_counter() - t
    errs = (abs(s.Delta0 - 0.030625), abs(s.L0 - 7.0), abs(s.U0 - 7.0))
    ok = errs[0] < 1e-5 and errs[1] < 1e-2 and errs[2] < 1e-2 and dt < 1.0
    record(1, ok, f"|dDelta0|={errs[0]:.1e} |L0-7|={errs[1]:.2e} |U0-7|={errs[2]:.2e} "
                  f"(need <1e-5, <1e-2, <1e-2) {dt:.2f}s")


def test_c02_gap_scaling():
    t = time.perf_counter()
    lams = np.array([1e-5, 1e-4, 1e-3])
    lt = []
    for lam in lams:
        p = REAL.replace(lam=lam)
        lt.append(gap_diagnostic(p, SIGMA, solve_zeroth(p, SIGMA).Delta0)[0])
    slope, icpt = np.polyfit(np.log(lams), np.log(lt), 1)
    coeff = gap_diagnostic(REAL, SIGMA, 0.0)[1]
    rel = abs(np.exp(icpt) / coeff - 1)
    dt = time.perf_counter() - t
    ok = abs(slope - 1 / 3) < 0.05 and rel < 0.10 and dt < 5.0
    record(2, ok, f"exponent {slope:.4f}, prefactor {np.exp(icpt):.5f} vs {coeff:.5f} "
                  f"(rel {rel:.3f}) {dt:.2f}s")


def test_c03_case_classification():
    t = time.perf_counter()
    a, b = solve_zeroth(REAL, SIGMA), solve_zeroth(COMPLEX, SIGMA)
    dt = time.perf_counter() - t
    ok = (a.case.value == "real" and b.case.value == "complex"
          and classify_case(REAL, SIGMA) == a.case and classify_case(COMPLEX, SIGMA) == b.case
          and dt < 1.0)
    record(3, ok, f"mu=7% -> {a.case.value}, mu=5% -> {b.case.value} {dt:.2f}s")


def test_c04_shooting_equivalence():
    t = time.perf_counter()
    worst = 0.0
    for p in (REAL, COMPLEX):
        s, r = solve_zeroth(p, SIGMA), oracles.shoot_zeroth(p, SIGMA)
        worst = max(worst, *(abs(x / y - 1) for x, y in
                             ((r.Delta0, s.Delta0), (r.L0, s.L0), (r.U0, s.U0))))
    dt = time.perf_counter() - t
    record(4, worst < 1e-7 and dt < 10.0, f"max rel diff {worst:.2e} (need <1e-7) {dt:.2f}s")


def test_c05_fast_delta1_quadrature():
    t = time.perf_counter()
    worst = 0.0
    for p in (REAL, COMPLEX):
        s = solve_zeroth(p, SIGMA)
        closed = fast_correction(s, -1.0).delta1
        worst = max(worst, abs(oracles.delta1_quadrature(s, -1.0, "fast") / closed - 1))
    dt = time.perf_counter() - t
    record(5, worst < 1e-8 and dt < 2.0, f"max rel diff {worst:.2e} (need <1e-8) {dt:.2f}s")


def _v1_conditions(sol, v1, l1, u1):
    """Mixed and expanded smooth-pasting conditions for v1 with shifts (l1, u1)."""
    g, lam = sol.params.gamma, sol.params.lam
    out = []
    for z, a, shift in ((sol.L0, 1 + sol.L0, l1), (sol.U0, 1 / (1 - lam) + sol.U0, u1)):
        t = (a * v1(z, 1), (1 - g) * v1(z), a * sol.v0(z, 1), (1 - g) * sol.v0(z))
        out.append(abs(t[0] - t[1]) / sum(map(abs, t)))
        t = (a * v1(z, 2), g * v1(z, 1), shift * a * sol.v0(z, 3), shift * (1 + g) * sol.v0(z, 2))
        out.append(abs(sum(t)) / sum(map(abs, t)))
    return out


def test_c06_residual_suite():
    t = time.perf_counter()
    worst, where = 0.0, ""

    def note(val, name):
        nonlocal worst, where
        if val >= worst:
            worst, where = val, name

    for label, p in (("real", REAL), ("complex", COMPLEX)):
        s = solve_zeroth(p, SIGMA)
        z = interior(s)
        note(oracles.ode_residual(s.v0, oracles.nt_operator(s), z), f"{label} v0 ode")
        note(oracles.ode_residual(s.w, oracles.adjoint_operator(s), z), f"{label} w ode")
        note(max(s.smooth_pasting_residuals().values()), f"{label} v0 boundary")
        fc = fast_correction(s, -1.0)
        note(oracles.ode_residual(fc.v1, oracles.fast_v1_operator(s, -1.0, fc.delta1), z),
             f"{label} fast v1 ode")
        note(max(_v1_conditions(s, fc.v1, fc.l1, fc.u1)), f"{label} fast v1 boundary")
        sc = slow_correction_at(p, SIGMA, -1.0)
        vq = vega_function(s, vega_block(s)) if label == "real" else vega_fd(p, SIGMA)
        note(oracles.ode_residual(sc.v1, oracles.slow_v1_operator(s, -1.0, sc.delta1, vq), z),
             f"{label} slow v1 ode")
        note(max(_v1_conditions(s, sc.v1, sc.l1, sc.u1)), f"{label} slow v1 boundary")
    dt = time.perf_counter() - t
    record(6, worst < 1e-8 and dt < 5.0,
           f"max scaled residual {worst:.2e} at {where} (need <1e-8) {dt:.2f}s")


def test_c07_vega_suite():
    t = time.perf_counter()
    h = 1e-4 * SIGMA

    def fd(fn, p=REAL):
        return oracles.finite_diff(lambda sg: fn(solve_zeroth(p, sg)), SIGMA, h, richardson=True)

    s = solve_zeroth(REAL, SIGMA)
    vb = vega_block(s)
    getters = {
        "dpr": lambda x: x.Delta0, "pi_dot_minus": lambda x: x.pi_minus,
        "pi_dot_plus": lambda x: x.pi_plus, "L0_dot": lambda x: x.L0, "U0_dot": lambda x: x.U0,
        "k_l_dot": lambda x: x.k_l, "k_u_dot": lambda x: x.k_u,
        "theta_dot_plus": lambda x: x.theta.theta_plus.real,
        "theta_dot_minus": lambda x: x.theta.theta_minus.real,
        "c_dot_plus": lambda x: x.c_plus, "c_dot_minus": lambda x: x.c_minus,
    }
    errs = {k: abs(getattr(vb, k) / fd(g) - 1) for k, g in getters.items()}
    zz = np.linspace(s.L0, s.U0, 25)
    errs["vega_function"] = float(np.max(np.abs(vega_function(s, vb)(zz) / fd(lambda x: x.v0(zz))
                                                - 1)))
    sc = solve_zeroth(COMPLEX, SIGMA)
    errs["dpr_complex"] = abs(delta_prime(sc) / fd(lambda x: x.Delta0, COMPLEX) - 1)
    worst_key = max(errs, key=errs.get)
    tiny = solve_zeroth(REAL.replace(lam=1e-8), SIGMA)
    limit = -REAL.mu**2 / (REAL.gamma * SIGMA**3)
    lim_err = abs(delta_prime(tiny) - limit)
    dt = time.perf_counter() - t
    ok = errs[worst_key] < 1e-5 and lim_err < 1e-3 and dt < 10.0
    record(7, ok, f"max rel FD diff {errs[worst_key]:.1e} ({worst_key}); "
                  f"lambda->0 Delta0'={delta_prime(tiny):.6f} vs {limit:.6f} {dt:.2f}s")


def test_c08_null_correction():
    vals = {}
    m = ou_logistic_model(rho=0.0)
    vals["fast rho=0"] = FastScaleBand(rho=0.0).fit()
    fr = fast_correction(solve_zeroth(REAL, SIGMA), v3(m, invariant_distribution(m)))
    vals["fast V3=0"] = fr
    mc = constant_vol_model(SIGMA, rho=-0.5)
    vals["fast f'=0"] = fast_correction(solve_zeroth(REAL, SIGMA),
                                        v3(mc, invariant_distribution(mc)))
    ms = ou_logistic_model(rho=0.0, regime="slow")
    vals["slow rho=0"] = slow_correction_at(REAL, float(ms.f(0.3)), v1_slow(ms, 0.3))
    mcs = constant_vol_model(SIGMA, rho=-0.5, regime="slow")
    vals["slow f'=0"] = slow_correction_at(REAL, SIGMA, v1_slow(mcs, 0.0))
    vals["slow complex rho=0"] = slow_correction_at(COMPLEX, SIGMA, 0.0)
    nonzero = []
    for name, c in vals.items():
        triple = ((c.delta1_, c.l1_, c.u1_) if isinstance(c, FastScaleBand)
                  else (c.delta1, c.l1, c.u1))
        if any(v != 0 for v in triple):
            nonzero.append(f"{name}: {triple}")
    record(8, not nonzero, f"{len(vals)} null configurations, exact zeros"
           + ("" if not nonzero else f"; nonzero {nonzero}"))


def test_c09_direction_of_shift():
    fr = cli.evaluate_point(cli.load_config(preset="fast-real"))
    sr = cli.evaluate_point(cli.load_config(preset="slow-real"))
    ok = fr["l1"] < 0 and fr["u1"] < 0 and sr["l1"] < 0 and sr["u1"] < 0
    record(9, ok, f"fast (l1,u1)=({fr['l1']:.1f},{fr['u1']:.1f}) "
                  f"slow (l1,u1)=({sr['l1']:.1f},{sr['u1']:.1f})")


@pytest.mark.slow
def test_c10_monte_carlo():
    t = time.perf_counter()
    s = solve_zeroth(REAL, SIGMA)
    base = SimConfig(params=REAL, model=constant_vol_model(SIGMA), policy=(s.L0, s.U0), T=50.0,
                     dt=1 / 2500, n_paths=10_000, seed=20240601, batch_count=20)
    r1 = simulate_growth(base)
    target1 = REAL.r + s.Delta0
    z1 = (r1.growth_rate_estimate - target1) / r1.standard_error

    model = ou_logistic_model(rho=-0.5, epsilon=1e-3)
    dist = invariant_distribution(model)
    sb = sigma_bar(model, dist)
    sf = solve_zeroth(REAL, sb)
    fc = fast_correction(sf, v3(model, dist))
    eps = model.epsilon
    band = fc.corrected_band(sf, eps)
    r2 = simulate_growth(SimConfig(params=REAL, model=model, policy=band, T=50.0, dt=1 / 2500,
                                   n_paths=10_000, seed=20240602, batch_count=20))
    target2 = REAL.r + sf.Delta0 + np.sqrt(eps) * fc.delta1
    z2 = (r2.growth_rate_estimate - target2) / r2.standard_error
    dt = time.perf_counter() - t
    ok = abs(z1) < 2 and abs(z2) < 2 and dt < 600
    record(10, ok, f"const vol {r1.growth_rate_estimate:.5f}+-{r1.standard_error:.5f} vs "
                   f"{target1:.5f} (z={z1:+.2f}); fast SV {r2.growth_rate_estimate:.5f}"
                   f"+-{r2.standard_error:.5f} vs {target2:.5f} (z={z2:+.2f}) {dt:.0f}s")


def test_c11_determinism(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"sweep": {"axis": "gamma", "range": [1.5, 4.0], "steps": 6}}))
    outs = []
    for i in range(2):
        a, b = tmp_path / f"solve{i}.json", tmp_path / f"sweep{i}.csv"
        assert cli.main(["solve", "--preset", "slow-complex", "--out", str(a)]) == 0
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(b)]) == 0
        outs.append((a.read_bytes(), b.read_bytes()))
    ok = outs[0] == outs[1]
    record(11, ok, f"solve {len(outs[0][0])} bytes, sweep {len(outs[0][1])} bytes, identical")
