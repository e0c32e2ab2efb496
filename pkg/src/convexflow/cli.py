"""Command-line driver.

Every subcommand builds a report ``{command, version, config_hash, results,
checks}``, prints it as JSON and, with ``--out``, also writes JSON and CSV
files there.  Exit code 0 when every check passes, 2 when one fails, 1 on
usage or I/O errors.
"""
import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, schema_help
from .errors import ConvexFlowError, FormatError, Infeasible


class UsageError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, int):
        return str(x)
    return x


def _table_csv(rows, cfg_hash):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols + ["config_hash", "version"])
    for r in rows:
        w.writerow([json.dumps(_jsonable(r.get(c))) if isinstance(r.get(c), (dict, list))
                    else _jsonable(r.get(c)) for c in cols] + [cfg_hash, __version__])
    return buf.getvalue()


# subcommands ---------------------------------------------------------------------------
def cmd_kernels(cfg, args):
    from .multipliers import fejer_kernel, kernel_table
    fejer, checks = [], {}
    for r in cfg["kernels"]["fejer_r"]:
        rep = fejer_kernel(int(r))
        expect = (2 * r * r + 4 * r + 3) / (3 * (r + 1))
        row = {"kind": "fejer", "N": r, "l1_norm": rep.l1_norm, "l2_sq": rep.l2_norm ** 2,
               "l2_sq_expected": expect}
        fejer.append(row)
        checks[f"fejer_l1_r{r}"] = abs(rep.l1_norm - 1.0) < 1e-10
        checks[f"fejer_l2_r{r}"] = abs(rep.l2_norm ** 2 - expect) < 1e-10
    Ns = [int(n) for n in cfg["kernels"]["dirichlet_N"]]
    reps = kernel_table(Ns)
    ab = reps[-1].fitted_exponents if reps and reps[-1].fitted_exponents else (None, None)
    dirich = [{"kind": "dirichlet_l1", "N": r.N, "l1_norm": r.l1_norm, "model": "log",
               "fitted_a": ab[0], "fitted_b": ab[1], "quad_error": r.quad_error} for r in reps]
    b = ab[1]
    trends = {"dirichlet_log_exponent": b,
              "dirichlet_log_exponent_in_[2.3,3.7]": b is not None and 2.3 <= b <= 3.7}
    return {"fejer": fejer, "dirichlet": dirich, "trends": trends}, checks, fejer + dirich


def cmd_geometry(cfg, args):
    from .blocks import DirectionSet, GammaSolver, estimate_epsilon_lambda, random_sym_unit, vec_sym
    dirs = DirectionSet()
    inv = dirs.validate()
    solver = GammaSolver(dirs)
    g_id = solver.solve(np.eye(3))
    est = estimate_epsilon_lambda(cfg["geometry"]["estimate_samples"], cfg["seed"], solver)
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["geometry"]["samples"]
    E = random_sym_unit(rng, n)
    rad = rng.uniform(0.0, est.value / 2, n)
    Rs = np.eye(3)[None] + rad[:, None, None] * vec_sym(E)
    res = solver.residual(Rs)
    table = [{"index": i, "xi": dirs.directions[i].tolist(), "gamma_identity": float(g_id[i])}
             for i in range(12)]
    checks = {"gamma_identity": bool(np.abs(g_id - math.sqrt(0.5)).max() < 1e-12),
              "reconstruction": res < 1e-12,
              "direction_invariants": (inv["integer_5xi"] and inv["integer_5C"] and inv["A_even"]
                                       and max(inv["unit"], inv["A_orthogonal"],
                                               inv["A_unit"]) < 1e-12)}
    results = {"gamma_identity": table, "epsilon": est.to_dict(),
               "condition": solver.condition, "random_residual": res, "samples": n,
               "invariants": inv}
    return results, checks, table


def cmd_build_flow(cfg, args):
    from .blocks import (build_all, pair_mean_residual, product_support_report,
                         representation_residual, validate_block)
    p = cfg.param_set()
    blocks = build_all(p, cfg["times"][:1], order=1)
    table = []
    for b in blocks:
        v = validate_block(b)
        v["xi_index"] = b.xi_index
        table.append(v)
    prod = product_support_report(blocks)
    rep = representation_residual(blocks, np.eye(3))
    pm = pair_mean_residual(blocks)
    trans = max(t.get("transport", 0.0) for t in table)
    checks = {"transport": trans < 1e-11,
              "mean_eta_sq": all(abs(m - 1.0) < 1e-10 for t in table for m in t["mean_eta_sq"]),
              "div_wave": max(t["div_wave"] for t in table) < 1e-11,
              "curl_wave": max(t["curl_wave"] for t in table) < 1e-12,
              "pair_mean": pm < 1e-12, "representation": rep < 1e-12}
    results = {"params": p.to_dict(), "blocks": table, "product_support": prod,
               "pair_mean_residual": pm, "representation_residual": rep,
               "max_div_flow": max(t["div_flow"] for t in table)}
    rows = [{k: t[k] for k in ("xi_index", "transport", "div_wave", "curl_wave", "div_flow",
                               "eta_min") if k in t} for t in table]
    return results, checks, rows


def _initial_state(cfg, args):
    from .fieldio import load_state
    from .step import TripleState, bootstrap, shear_flow
    if getattr(args, "state", None):
        return load_state(args.state)
    if getattr(args, "zero", False):
        return TripleState.zero(cfg["times"])
    b = cfg["bootstrap"]
    p = cfg["params"]
    u = shear_flow(cfg["times"], b["height"], b["t0"], b["t1"], b["power"])
    return bootstrap(u, p["nu"], p["theta"], p["beta"])


def cmd_step(cfg, args):
    from .fieldio import save_state
    from .iteration import run_iteration
    state = _initial_state(cfg, args)
    p = cfg.param_set()
    res = run_iteration(state, cfg["iterate"]["eps"], 1, [p], K_a=cfg["K_a"], tol=cfg["tol"])
    rec = res.records[0]
    if cfg["out"]:
        save_state(res.states[-1], os.path.join(cfg["out"], "state"))
    checks = {"residual": rec.residual_l2 < cfg["tol"], "support": rec.containment["ok"],
              "div_v": rec.invariants["div_v"] < 1e-11,
              "trace_R": rec.invariants["trace_R"] < 1e-11}
    if rec.diagnostics:
        checks["triangle"] = rec.diagnostics[-1]["triangle_ok"]
    return {"step": rec.to_dict()}, checks, rec.diagnostics


def cmd_iterate(cfg, args):
    from .fieldio import save_state
    from .iteration import run_iteration
    state = _initial_state(cfg, args)
    n = cfg["iterate"]["n_steps"]
    p = cfg.param_set()
    res = run_iteration(state, cfg["iterate"]["eps"], n, [p] * n, K_a=cfg["K_a"],
                        tol=cfg["tol"])
    if cfg["out"]:
        save_state(res.states[-1], os.path.join(cfg["out"], "state"))
    checks = {}
    for r in res.records:
        checks[f"residual_q{r.q}"] = r.residual_l2 < cfg["tol"]
        checks[f"support_q{r.q}"] = r.containment["ok"]
    rows = [{k: v for k, v in r.to_dict().items()
             if k not in ("diagnostics", "params", "invariants", "containment")}
            for r in res.records]
    return res.to_dict(), checks, rows


def cmd_residual(cfg, args):
    from .step import verify_approx
    state = _initial_state(cfg, args)
    rep = verify_approx(state, cfg.param_set(), l1=True)
    rows = [{"time": float(t), "l2": a, "l1": b} for t, a, b in zip(rep.times, rep.l2, rep.l1)]
    return rep.to_dict(), {"residual": rep.max_l2 < cfg["tol"]}, rows


def cmd_params(cfg, args):
    from .params import check_params, feasibility, plan_params
    beta = args.beta if args.beta is not None else cfg["feasibility"]["beta"]
    cert = feasibility(beta)
    results = {"feasibility": cert.to_dict(), "check_params": check_params(cfg.param_set())}
    checks = {"config_params_valid": not results["check_params"]}
    plans = []
    if cert.feasible:
        y, z = cert.witness
        lams = [args.lam] if args.lam is not None else cfg["feasibility"]["plan_lam"]
        for lam in lams:
            try:
                p, d = plan_params(int(lam), beta, float(y), float(z))
                plans.append({"lam": lam, "ok": True, "params": p.to_dict(), "deltas": d})
            except Infeasible as exc:
                plans.append({"lam": lam, "ok": False, "clauses": exc.clauses,
                              "deltas": exc.deltas})
    results["plans"] = plans
    rows = [{"lam": p["lam"], "ok": p["ok"]} for p in plans]
    return results, checks, rows


def cmd_norms(cfg, args):
    from .fieldio import read_field
    from .norms import luxemburg_norm, lp_norm, parseval_l2
    if not args.field:
        raise UsageError("norms needs --field <path to CIFLD1 file>")
    f, header = read_field(args.field)
    rows = []
    for p in (1.0, 1.5, 2.0, math.inf):
        rows.append({"norm": f"L^{p}", "value": lp_norm(f, p)})
    for a in (0.0, 1.0, 2.0):
        rows.append({"norm": f"Luxemburg(alpha={a})", "value": luxemburg_norm(f, a)})
    pl2 = parseval_l2(f)
    rows.append({"norm": "L^2 (Parseval)", "value": pl2})
    l1 = rows[0]["value"]
    checks = {"luxemburg_0_equals_l1": abs(rows[4]["value"] - l1) <= 1e-9 * max(1.0, l1),
              "l2_quadrature": abs(rows[2]["value"] - pl2) <= 1e-10 * max(1.0, pl2)}
    return {"header": header, "norms": rows, "bandwidth": f.bandwidth,
            "nmodes": f.nmodes}, checks, rows


COMMANDS = {"kernels": cmd_kernels, "geometry": cmd_geometry, "build-flow": cmd_build_flow,
            "step": cmd_step, "iterate": cmd_iterate, "residual": cmd_residual,
            "params": cmd_params, "norms": cmd_norms}


def build_parser():
    ap = argparse.ArgumentParser(prog="convexflow", epilog=schema_help(),
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="directory for report files")
    common.add_argument("--threads", type=int, help="FFT worker threads (default CI_THREADS or 1)")
    common.add_argument("--tol", type=float, help="residual tolerance")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("step", "iterate", "residual"):
            sp.add_argument("--state", help="directory holding a stored triple")
        if name == "residual":
            sp.add_argument("--zero", action="store_true", help="use the zero triple")
        if name == "params":
            sp.add_argument("--beta", type=float)
            sp.add_argument("--lam", type=int)
        if name == "norms":
            sp.add_argument("--field", help="CIFLD1 file")
    return ap


def _resolve(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.tol is not None:
        cfg.data["tol"] = args.tol
    if args.out is not None:
        cfg.data["out"] = args.out
    threads = args.threads
    if threads is None and os.environ.get("CI_THREADS"):
        try:
            threads = int(os.environ["CI_THREADS"])
        except ValueError as exc:
            raise ConfigError("CI_THREADS must be an integer") from exc
    if threads is not None:
        if threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg.data["threads"] = threads
    return cfg


def run(argv=None, stdout=None):
    """Execute one subcommand; returns (exit code, report or None)."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (0 if exc.code == 0 else 1), None
    try:
        cfg = _resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}\n{schema_help()}", file=sys.stderr)
        return 1, None
    from .norms import set_norm_grid
    from .spectral import set_threads, set_threshold
    set_threads(cfg["threads"])
    set_threshold(cfg["threshold"])
    set_norm_grid(cfg["grid"]["norm_oversample"], cfg["grid"]["max_grid"])
    try:
        results, checks, rows = COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    except ConvexFlowError as exc:
        report = {"command": args.command, "version": __version__, "config_hash": cfg.hash(),
                  "error": f"{type(exc).__name__}: {exc}", "checks": {"completed": False}}
        print(json.dumps(report, sort_keys=True, indent=2), file=stdout)
        return 2, report
    report = _jsonable({"command": args.command, "version": __version__,
                        "config_hash": cfg.hash(), "results": results, "checks": checks})
    text = json.dumps(report, sort_keys=True, indent=2)
    print(text, file=stdout)
    if cfg["out"]:
        try:
            os.makedirs(cfg["out"], exist_ok=True)
            stem = os.path.join(cfg["out"], args.command)
            with open(stem + ".json", "w") as fh:
                fh.write(text + "\n")
            with open(stem + ".csv", "w") as fh:
                fh.write(_table_csv(rows or [], cfg.hash()))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1, report
    return (0 if all(checks.values()) else 2), report


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
