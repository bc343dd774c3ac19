"""Command-line front end.

Exit status is 0 on success, 2 when the requested computation returned a
diverged result (a legitimate answer for branch probes) and 1 on errors.
"""

import argparse
import csv
import json
import os
import sys
from importlib import metadata

import numpy as np

from . import branch, eigen, growth, singular
from .catalog import lookup
from .config import (
    SUBCOMMANDS,
    RunConfig,
    apply_override,
    build_nonlinearity,
    build_problem,
    load_config,
    validate,
)
from .exceptions import ConfigError, InvalidDomain, PlapError
from .radial import FixedRHS, OrderZero, green_apply, norms, residual
from .transform import GridSpec, build_transform, g_to_beta

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _clean(obj):
    # JSON has no inf/nan; write them as strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


def _tables(nl, p, cfg):
    grid = GridSpec(n=cfg.num("transform_nodes"))
    return build_transform(nl, p, grid) if nl.is_beta else g_to_beta(nl, p, grid)


def _diverged(res):
    return {"converged": False, "reason": res.reason, "lambda": res.lam,
            "iterations": res.iterations, "sup": res.sup}


def _solution_summary(sol, problem):
    nr = norms(sol)
    return {
        "central_value": sol.central_value,
        "sup": nr.sup,
        "seminorm": nr.seminorm,
        "seminorm_converged": nr.seminorm_converged,
        "residual": residual(sol, problem),
        "converged": bool(sol.converged),
        "iterations": sol.iterations,
    }


def cmd_transform(cfg, out):
    p = float(cfg.problem.get("p", 2.0))
    nl = build_nonlinearity(cfg, p)
    if nl is None:
        raise ConfigError("transform needs a [nonlinearity] section")
    tb = _tables(nl, p, cfg)
    tb.to_csv(os.path.join(out, "transform.csv"))
    return EXIT_OK, {
        "L": tb.L, "Lambda": tb.Lambda, "L_converged": tb.L_converged,
        "Lambda_converged": tb.Lambda_converged, "gamma_limit": tb.gamma_limit,
        "g_bounded": tb.g_bounded, "g_limit": tb.g_limit, "truncated": tb.truncated,
        "roundtrip_error": tb.roundtrip_error(), "relation_error": tb.relation_error(),
        "nodes": len(tb.t),
    }


def cmd_solve(cfg, out):
    pr = build_problem(cfg)
    src = pr.source
    path = os.path.join(out, "solution.csv")
    if isinstance(src, FixedRHS):
        sol = green_apply(pr)
        sol.to_csv(path)
        return EXIT_OK, _solution_summary(sol, pr)
    if isinstance(src, OrderZero):
        sol = singular.solve_with_atom(pr, tol=cfg.num("tol"), max_iter=cfg.num("max_iter"),
                                       cap=cfg.num("cap"))
        if not sol:
            sol.last.to_csv(path)
            return EXIT_DIVERGED, _diverged(sol)
        sol.to_csv(path)
        return EXIT_OK, _solution_summary(sol, pr)
    # gradient form: solve the order-zero problem and map back with H
    tb = _tables(src.beta, pr.p, cfg)
    pv = pr.with_(source=OrderZero(tb.as_g_nonlinearity()))
    v = singular.solve_with_atom(pv, tol=cfg.num("tol"), max_iter=cfg.num("max_iter"),
                                 cap=cfg.num("cap"))
    if not v:
        return EXIT_DIVERGED, _diverged(v)
    rep = singular.correspondence_check(v, tb, pv)
    rep.u.to_csv(path)
    summary = _solution_summary(rep.u, pr)
    summary["correspondence"] = rep.as_dict()
    return EXIT_OK, summary


def cmd_eigen(cfg, out):
    pr = build_problem(cfg)
    res = eigen.first_eigenpair(pr.weight, pr.p, pr.N, pr.grid, tol=cfg.num("tol"),
                                max_iter=min(cfg.num("max_iter"), 10_000))
    res.eigenfunction.to_csv(os.path.join(out, "solution.csv"))
    return EXIT_OK, {
        "lambda1": res.lambda1, "attained": res.attained, "converged": res.converged,
        "iterations": res.iterations, "origin_mass": res.origin_mass,
        "min_rayleigh": min(res.rayleigh_history),
    }


def _star(cfg, pr):
    return branch.find_lambda_star(pr, bracket_hint=cfg.num("bracket_hint"),
                                   rel_tol=cfg.num("rel_tol"), lambda_max=cfg.num("lambda_max"),
                                   max_iter=cfg.num("max_iter"), tol=cfg.num("tol"))


def _star_dict(st):
    return {"lo": st.lo, "hi": st.hi, "infinite": st.infinite, "lambda_small": st.lambda_small,
            "probes": [{"lambda": lam, "converged": ok} for lam, ok in st.probes]}


def cmd_lambda_star(cfg, out):
    pr = build_problem(cfg)
    st = _star(cfg, pr)
    return EXIT_OK, {"lambda_star": _star_dict(st)}


def cmd_branch(cfg, out):
    pr = build_problem(cfg)
    st = _star(cfg, pr)
    diag = branch.branch_diagram(pr, samples=cfg.num("samples"), star=st)
    diag.to_csv(os.path.join(out, "diagram.csv"))
    diag.extremal.to_csv(os.path.join(out, "solution.csv"))
    summary = {"lambda_star": _star_dict(st),
               "sup_nondecreasing": bool(np.all(np.diff(diag.sup) >= 0)),
               "energy_negative": bool(np.all(diag.energy < 0)),
               "min_margin": float(np.nanmin(diag.margin)) if pr.p >= 2 else float("nan")}
    if not st.infinite:
        ex = branch.extremal_solution(pr, st, r=cfg.num("r"),
                                      growth=_growth(pr))
        summary["extremal"] = {
            "lambdas": ex.lambdas, "sups": ex.sups, "seminorms": ex.seminorms,
            "central_values": ex.central_values,
            "central_extrapolated": ex.central_extrapolated,
            "bounded_trend": ex.bounded_trend,
            "prediction": _prediction_dict(ex.prediction),
        }
    return EXIT_OK, summary


def _growth(pr):
    if isinstance(pr.source, OrderZero) and pr.p <= pr.N:
        return growth.classify_growth(pr.source.g, pr.p, pr.N)
    return None


def _prediction_dict(pred):
    if pred is None:
        return None
    return {k: getattr(pred, k) for k in pred.__dataclass_fields__}


def cmd_sweep(cfg, out):
    pr = build_problem(cfg)
    curve = branch.shoot_sweep(pr, a_max=cfg.num("a_max"), count=cfg.num("count"))
    _write_csv(os.path.join(out, "sweep.csv"), ["a", "B"], zip(curve.a, curve.B))
    return EXIT_OK, {"lambda": pr.lam, "roots": curve.roots, "root_B": curve.root_B,
                     "blowups": curve.blowups}


def cmd_singular(cfg, out):
    pr = build_problem(cfg)
    m = float(cfg.singular.get("m", 0.5))
    fam = singular.um_family(m, pr.p, pr.N, pr.grid)
    _write_csv(os.path.join(out, "family.csv"), ["r", "u_m", "v_m"],
               zip(fam.u_sol.r, fam.u_sol.u, fam.v_sol.u))
    K = singular.dirac_coefficient(m, pr.p, pr.N)
    res_u, res_v = singular.family_residual(fam)
    lin = lookup("linear", pr.p)
    tb = _tables(lin.beta, pr.p, cfg)
    pv = pr.with_(lam=0.0, atom_mass=fam.K_mN, source=OrderZero(lin.g))
    rep = singular.correspondence_check(fam.v_sol, tb, pv)
    return EXIT_OK, {
        "m": m, "K": fam.K_mN, "K_numerical": {repr(r): v for r, v in K.numerical.items()},
        "K_rel_error": K.max_rel_error, "K_monotone_decay": K.monotone_decay,
        "residual_u": res_u, "residual_v": res_v,
        "seminorm_slope_u": norms(fam.u_sol).cutoff_slope,
        "seminorm_slope_v": norms(fam.v_sol).cutoff_slope,
        "correspondence": rep.as_dict(),
    }


def cmd_predict(cfg, out):
    p = float(cfg.problem.get("p", 2.0))
    N = int(float(cfg.problem.get("N", 3)))
    nl = build_nonlinearity(cfg, p)
    rep = None
    if nl is not None:
        g = nl if not nl.is_beta else _tables(nl, p, cfg).as_g_nonlinearity()
        rep = growth.classify_growth(g, p, N)
    pred = branch.regularity_prediction(p, N, cfg.num("r"), rep)
    summary = {"prediction": _prediction_dict(pred)}
    if rep is not None:
        summary["growth"] = {k: getattr(rep, k) for k in rep.__dataclass_fields__}
    return EXIT_OK, summary


COMMANDS = {
    "transform": cmd_transform,
    "solve": cmd_solve,
    "eigen": cmd_eigen,
    "branch": cmd_branch,
    "lambda-star": cmd_lambda_star,
    "sweep": cmd_sweep,
    "singular": cmd_singular,
    "predict": cmd_predict,
}


def run(cfg):
    """Execute one configured run; returns the exit status."""
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    status, summary = COMMANDS[cfg.subcommand](cfg, out)
    summary = {"subcommand": cfg.subcommand, "version": _version(), "status": status,
               "config": cfg.echo(), **summary}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status, summary


def _print_summary(summary, stream):
    skip = {"config", "version"}
    for key in sorted(summary):
        if key in skip:
            continue
        val = summary[key]
        if isinstance(val, dict):
            inner = ", ".join(f"{k}={_short(v)}" for k, v in sorted(val.items())
                              if not isinstance(v, (list, dict, np.ndarray)))
            print(f"{key}: {inner}", file=stream)
        elif not isinstance(val, (list, np.ndarray)) or len(val) <= 8:
            print(f"{key}: {_short(val)}", file=stream)


def _short(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def build_parser():
    ap = argparse.ArgumentParser(prog="plaplab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                    help="overrides run.subcommand from the config")
    ap.add_argument("--config", help="INI-style run configuration")
    ap.add_argument("--out", help="output directory (default: run.out or ./run)")
    ap.add_argument("--grid", type=int, help="number of radial grid nodes")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="set section.key=value; repeatable")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.subcommand:
            cfg.subcommand = args.subcommand
        if args.out:
            cfg.out = args.out
        if args.grid is not None:
            cfg.numerics["grid"] = str(args.grid)
        for item in args.override:
            apply_override(cfg, item)
        validate(cfg)
        status, summary = run(cfg)
    except (PlapError, InvalidDomain, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    _print_summary(summary, sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
