"""Command-line front end: ``tcvol solve|sweep|simulate|validate``.

Exit codes: 0 ok, 2 invalid domain, 3 solver failure, 4 validation failure.
"""

import argparse
import copy
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .constvol import eigen_equation, solve_zeroth
from .exceptions import (CollapsedBandError, ConsistencyError, DegenerateBoundaryError,
                         DomainError, EigenvalueNotFoundError, UnsupportedCaseError)
from .fastscale import fast_correction
from .model import (MarketParams, invariant_distribution, model_from_dict, sigma_bar, v1_slow,
                    v3)
from .slowscale import slow_correction_at

EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

PRESETS = {
    "fast-real": {"regime": "fast", "params": {"mu": 0.07, "gamma": 2.0, "lambda": 0.01},
                  "sigma": 0.2, "V3": -1.0, "epsilon": 1e-3},
    "fast-complex": {"regime": "fast", "params": {"mu": 0.05, "gamma": 2.0, "lambda": 0.01},
                     "sigma": 0.2, "V3": -1.0, "epsilon": 1e-4},
    "slow-real": {"regime": "slow", "params": {"mu": 0.07, "gamma": 2.0, "lambda": 0.01},
                  "sigma": 0.2, "V1": -1.0, "epsilon": 1e-6},
    "slow-complex": {"regime": "slow", "params": {"mu": 0.05, "gamma": 2.0, "lambda": 0.01},
                     "sigma": 0.2, "V1": -1.0, "epsilon": 1e-3},
}

# rows whose Merton proportion is this close to one are flagged
PI_MERTON_FLAG = 0.95

SWEEP_COLUMNS = ["axis_value", "Delta0", "delta1", "L0", "U0", "l1", "u1", "l_corr", "u_corr",
                 "case", "status", "reason"]


def load_config(path=None, preset=None, regime=None):
    """Preset defaults overlaid with the JSON file, then the ``--regime`` flag."""
    cfg = {}
    if path is not None:
        with open(path) as fh:
            cfg = json.load(fh)
    name = preset or cfg.get("preset")
    if name is None:
        name = "slow-real" if (regime or cfg.get("regime")) == "slow" else "fast-real"
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    merged = copy.deepcopy(PRESETS[name])
    for key, val in cfg.items():
        if key == "params":
            merged["params"].update(val)
        else:
            merged[key] = val
    if regime is not None:
        merged["regime"] = regime
    merged["preset"] = name
    return merged


def _params(cfg):
    return MarketParams.from_dict(cfg["params"])


def evaluate_point(cfg):
    """Zeroth order plus first-order correction for one configuration."""
    params = _params(cfg)
    regime = cfg.get("regime", "fast")
    model = model_from_dict(cfg["model"]) if "model" in cfg else None
    eps = float(model.epsilon if model is not None and "epsilon" not in cfg else cfg["epsilon"])
    out = {"regime": regime, "epsilon": eps}
    if regime == "fast":
        if model is not None:
            dist = invariant_distribution(model)
            sigma = sigma_bar(model, dist)
            V = v3(model, dist) if "V3" not in cfg else float(cfg["V3"])
        else:
            sigma, V = float(cfg["sigma"]), float(cfg.get("V3", 0.0))
        sol = solve_zeroth(params, sigma)
        corr = fast_correction(sol, V)
        out.update(sigma=sigma, V3=V, method="closed", fredholm_residual=corr.fredholm_residual)
        d1, l1, u1 = corr.delta1, corr.l1, corr.u1
    elif regime == "slow":
        z = float(cfg.get("z", 0.0))
        if model is not None:
            sigma = float(model.f(z))
            V = v1_slow(model, z) if "V1" not in cfg else float(cfg["V1"])
        else:
            sigma, V = float(cfg["sigma"]), float(cfg.get("V1", 0.0))
        corr = slow_correction_at(params, sigma, V, method=cfg.get("method"), z=z)
        sol = solve_zeroth(params, sigma)
        out.update(sigma=sigma, V1=V, z=z, method=corr.method,
                   fredholm_residual=corr.fredholm_residual)
        d1, l1, u1 = corr.delta1, corr.l1, corr.u1
    else:
        raise DomainError(f"regime must be 'fast' or 'slow', got {regime!r}")
    s = np.sqrt(eps)
    out.update(case=sol.case.value, Delta0=sol.Delta0, L0=sol.L0, U0=sol.U0, delta1=d1, l1=l1,
               u1=u1, l_corr=sol.L0 + s * l1, u_corr=sol.U0 + s * u1,
               rate_corr=sol.Delta0 + s * d1, pi_merton=sol.pi_merton, delta_max=sol.delta_max,
               determinant_residual=sol.determinant_residual())
    return out


def cmd_solve(cfg):
    report = {"command": "solve", "version": __version__, "config": cfg}
    report["result"] = evaluate_point(cfg)
    return report


def _sweep_point(cfg, axis, value):
    c = copy.deepcopy(cfg)
    if axis in ("mu", "gamma"):
        c["params"][axis] = value
    elif axis == "sigma_bar":
        if "model" in c:
            raise DomainError("sigma_bar sweeps need a constant-sigma configuration")
        c["sigma"] = value
    elif axis == "z":
        if "model" not in c or c.get("regime") != "slow":
            raise DomainError("z sweeps need the slow regime with a factor model")
        c["z"] = value
    else:
        raise DomainError(f"unknown sweep axis {axis!r}")
    return c


def _flags(res):
    """Warnings for rows that solved but sit outside the expansion's useful range."""
    notes = []
    if res["pi_merton"] > PI_MERTON_FLAG:
        notes.append(f"pi_merton={res['pi_merton']:.4f} near 1, band diverging")
    if not 0 < res["l_corr"] < res["u_corr"]:
        notes.append("corrected band not an ordered positive interval; epsilon too large here")
    return notes


def cmd_sweep(cfg):
    """Rows for every grid point; failures become skipped rows with their reason.

    Status is ``ok``, ``flagged`` (solved, with a warning in ``reason``) or
    ``skipped`` (no numbers).
    """
    block = cfg.get("sweep")
    if block is None:
        raise DomainError("sweep needs a 'sweep' block {axis, range, steps}")
    axis, (lo, hi), steps = block["axis"], block["range"], int(block["steps"])
    if steps < 1:
        raise DomainError("sweep steps must be positive")
    grid = np.linspace(float(lo), float(hi), steps)
    _sweep_point(cfg, axis, float(grid[0]))  # validates the axis up front

    def one(value):
        row = {"axis_value": float(value)}
        try:
            res = evaluate_point(_sweep_point(cfg, axis, float(value)))
        except (DomainError, EigenvalueNotFoundError, ConsistencyError,
                DegenerateBoundaryError, UnsupportedCaseError) as exc:
            row.update(status="skipped", reason=f"{type(exc).__name__}: {exc}")
            return row
        row.update({k: res[k] for k in SWEEP_COLUMNS[1:10]}, status="ok", reason="")
        notes = _flags(res)
        if notes:
            row.update(status="flagged", reason="; ".join(notes))
        return row

    workers = min(len(grid), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return "" if v is None else str(v)


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def cmd_simulate(cfg):
    from .model import constant_vol_model
    from .simulate import SimConfig, simulate_growth

    params = _params(cfg)
    sim = dict(cfg.get("simulate", {}))
    if "model" in cfg:
        model = model_from_dict(cfg["model"])
    else:
        model = constant_vol_model(float(cfg["sigma"]))
    band = sim.pop("band", "corrected")
    point = evaluate_point(cfg)
    if band == "zeroth":
        policy = (point["L0"], point["U0"])
    elif band == "corrected":
        policy = (point["l_corr"], point["u_corr"])
    else:
        raise DomainError(f"band must be 'zeroth' or 'corrected', got {band!r}")
    res = simulate_growth(SimConfig(params=params, model=model, policy=policy, **sim))
    target = params.r + point["rate_corr"]
    out = {"command": "simulate", "version": __version__, "config": cfg, "band": list(policy),
           "target_rate": target, "result": res.to_dict(),
           "z_score": (res.growth_rate_estimate - target) / res.standard_error}
    return out


def _check(rows, name, ok, detail):
    rows.append({"check": name, "passed": bool(ok), "detail": detail})


def cmd_validate(quick=False):
    """Oracle cross-checks on the preset parameter sets."""
    from . import oracles
    from .slowscale import vega_block, vega_function

    rows = []
    for name in ("fast-real", "fast-complex"):
        cfg = PRESETS[name]
        params = _params(cfg)
        sol = solve_zeroth(params, cfg["sigma"])
        shot = oracles.shoot_zeroth(params, cfg["sigma"])
        err = max(abs(shot.Delta0 / sol.Delta0 - 1), abs(shot.L0 / sol.L0 - 1),
                  abs(shot.U0 / sol.U0 - 1))
        _check(rows, f"{name}: shooting vs closed form", err < 1e-7, f"max rel err {err:.2e}")
        corr = fast_correction(sol, cfg["V3"])
        q = oracles.delta1_quadrature(sol, cfg["V3"], "fast")
        err = abs(q / corr.delta1 - 1)
        _check(rows, f"{name}: delta1 closed form vs quadrature", err < 1e-8, f"rel err {err:.2e}")
        zz = np.linspace(sol.L0, sol.U0, 100)
        res = max(oracles.ode_residual(sol.v0, oracles.nt_operator(sol), zz),
                  oracles.ode_residual(sol.w, oracles.adjoint_operator(sol), zz),
                  oracles.ode_residual(corr.v1, oracles.fast_v1_operator(sol, cfg["V3"],
                                                                         corr.delta1), zz))
        _check(rows, f"{name}: ODE residuals v0, w, v1", res < 1e-8, f"max {res:.2e}")
        bad = eigen_equation(params, cfg["sigma"], sol.Delta0 * (1 + 1e-3), sol.case)
        _check(rows, f"{name}: perturbed Delta0 is rejected", bad > 1e-10,
               f"determinant residual {bad:.2e}")
    cfg = PRESETS["slow-real"]
    params = _params(cfg)
    sol = solve_zeroth(params, cfg["sigma"])
    vb = vega_block(sol)
    fd = oracles.finite_diff(lambda s: solve_zeroth(params, s).Delta0, cfg["sigma"],
                             1e-4 * cfg["sigma"], richardson=True)
    err = abs(vb.dpr / fd - 1)
    _check(rows, "slow-real: Delta0' vs finite difference", err < 1e-6, f"rel err {err:.2e}")
    vega = vega_function(sol, vb)
    zz = np.linspace(sol.L0, sol.U0, 20)
    h = 1e-4 * cfg["sigma"]
    fd = oracles.finite_diff(lambda s: solve_zeroth(params, s).v0(zz), cfg["sigma"], h,
                             richardson=True)
    err = float(np.max(np.abs(vega(zz) / fd - 1)))
    _check(rows, "slow-real: Vega function vs finite difference", err < 1e-5, f"rel err {err:.2e}")
    corr = slow_correction_at(params, cfg["sigma"], cfg["V1"])
    q = oracles.delta1_quadrature(sol, cfg["V1"], "slow", vega=vega)
    err = abs(q / corr.delta1 - 1)
    _check(rows, "slow-real: delta1 closed form vs quadrature", err < 1e-7, f"rel err {err:.2e}")
    zero_f = fast_correction(solve_zeroth(_params(PRESETS["fast-real"]), 0.2), 0.0)
    zero_s = slow_correction_at(params, cfg["sigma"], 0.0)
    vals = [zero_f.delta1, zero_f.l1, zero_f.u1, zero_s.delta1, zero_s.l1, zero_s.u1]
    _check(rows, "rho = 0: all first-order corrections vanish", all(v == 0 for v in vals),
           f"max |.| {max(map(abs, vals)):.1e}")
    return rows


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def build_parser():
    ap = argparse.ArgumentParser(prog="tcvol", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "simulate", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--regime", choices=("fast", "slow"), default=None)
        p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            rows = cmd_validate()
            width = max(len(r["check"]) for r in rows)
            lines = [f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']:<{width}}  {r['detail']}"
                     for r in rows]
            if args.format == "json":
                _emit(_dump_json(rows), args.out)
            else:
                _emit("\n".join(lines) + "\n", args.out)
            return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VALIDATION
        cfg = load_config(args.config, args.preset, args.regime)
        if args.command == "solve":
            report = cmd_solve(cfg)
            if args.format == "csv":
                cols = SWEEP_COLUMNS[1:10]
                _emit(rows_to_csv([report["result"]], cols), args.out)
            else:
                _emit(_dump_json(report), args.out)
        elif args.command == "sweep":
            rows = cmd_sweep(cfg)
            if args.format == "json":
                _emit(_dump_json(rows), args.out)
            else:
                _emit(rows_to_csv(rows, SWEEP_COLUMNS), args.out)
                if args.out is not None:
                    meta = {"command": "sweep", "version": __version__, "config": cfg,
                            "columns": SWEEP_COLUMNS}
                    with open(args.out + ".meta.json", "w") as fh:
                        fh.write(_dump_json(meta))
        elif args.command == "simulate":
            report = cmd_simulate(cfg)
            if args.format == "csv":
                r = report["result"]
                row = {"growth_rate_estimate": r["growth_rate_estimate"],
                       "standard_error": r["standard_error"], "target_rate": report["target_rate"],
                       "z_score": report["z_score"], "paths_bankrupt": r["paths_bankrupt"]}
                _emit(rows_to_csv([row], list(row)), args.out)
            else:
                _emit(_dump_json(report), args.out)
    except CollapsedBandError as exc:
        print(f"error: collapsed band: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (DomainError, UnsupportedCaseError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (EigenvalueNotFoundError, ConsistencyError, DegenerateBoundaryError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
