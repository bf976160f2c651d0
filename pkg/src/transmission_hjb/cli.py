"""Command-line entry point ``transmission-hjb``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import io
from .closed_forms import (
    AnnulusSolution,
    canonical_rho,
    candidate_1d,
    eval_annulus,
    solve_1d_family,
    solve_annulus,
)
from .config import ExperimentConfig, build_problem, load_config, solver_config
from .errors import ConfigurationError, UsageError
from .experiments import SUITES, run_convergence, run_suite
from .geometry import GridFunction, build_grid_1d, build_grid_radial
from .montecarlo import PathConfig, Policy, SimGeometry, estimate_value
from .regularize import convolution_params, inf_convolution, semiconvexity_defect, sup_convolution
from .scheme import InterfaceRule, solve
from .verifier import verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_set(items: Sequence[str] | None) -> dict[str, Any]:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _config(args) -> ExperimentConfig:
    overrides = _parse_set(getattr(args, "set", None))
    for flag, key in (("h", "geometry.h"), ("rule", "solver.rule"), ("tol", "verifier.tolerance"),
                      ("out_dir", "outputs.directory")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if args.config is None:
        raise UsageError("--config is required")
    return load_config(args.config, overrides)


def _emit(payload: dict[str, Any], out: str | Path | None) -> None:
    if out is not None:
        io.write_json(payload, out)
    print(io.dumps_json(payload), end="")


def cmd_solve(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    u, diag = solve(problem, solver_config(cfg))
    sol_path = Path(args.out) if args.out else cfg.output_path("solution")
    io.write_solution_csv(u, sol_path)
    report = Path(args.report) if args.report else cfg.output_path("report")
    _emit({"config": cfg.echo(), "diagnostics": diag.to_dict(), "solution": str(sol_path)}, report)
    return EXIT_OK if diag.converged else EXIT_FAIL


def cmd_verify(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    u = io.read_solution_csv(args.solution, problem.grid)
    rule = cfg.verifier.rule or cfg.solver.rule
    rep = verify(u, problem, rule, cfg.verifier.tolerance)
    _emit({"config": cfg.echo(), "report": rep.to_dict()}, args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_oracle1d(args) -> int:
    sol = solve_1d_family(args.alpha)
    payload: dict[str, Any] = {"alpha": args.alpha, "exists": sol.exists}
    if sol.exists:
        payload.update({"beta": sol.beta, "interface_value": sol.interface_value})
    beta = args.beta if args.beta is not None else (sol.beta if sol.exists else None)
    if args.h is not None and beta is not None:
        grid = build_grid_1d(-1.0, 1.0, 0.0, args.h)
        u = GridFunction(grid, candidate_1d(args.alpha, beta, grid.axis(0)))
        if args.out:
            io.write_solution_csv(u, args.out)
            payload["csv"] = str(args.out)
    _emit(payload, args.report)
    return EXIT_OK


def cmd_annulus(args) -> int:
    rho = canonical_rho(args.n, args.r, args.R) if args.rho is None else args.rho
    sol = solve_annulus(args.n, args.r, args.R, rho)
    if not isinstance(sol, AnnulusSolution):
        _emit({"feasible": False, "rho": rho, "reason": str(sol)}, args.report)
        return EXIT_FAIL
    payload = {"feasible": True, "n": sol.n, "r": sol.r, "R": sol.R, "rho": sol.rho, "A": sol.A,
               "B": sol.B, "inner_slope": sol.slope, "residuals": list(sol.residuals)}
    if args.h is not None and args.out:
        grid = build_grid_radial(sol.r, sol.R, sol.rho, args.h, sol.n)
        io.write_solution_csv(GridFunction(grid, eval_annulus(sol, grid.axis(0))), args.out)
        payload["csv"] = str(args.out)
    _emit(payload, args.report)
    return EXIT_OK


def cmd_regularize(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    u = io.read_solution_csv(args.solution, problem.grid)
    fn = sup_convolution if args.mode == "sup" else inf_convolution
    w = fn(u, args.eps)
    if args.out_csv:
        io.write_solution_csv(w, args.out_csv)
    params = convolution_params(u, args.eps)
    payload = {"mode": args.mode, "eps": args.eps, "radius": params.radius,
               "nodes": int(w.mask.sum()),
               "max_change": float(np.abs(w.values - u.values)[w.mask].max())}
    if args.mode == "sup":
        payload["semiconvexity_defect"] = semiconvexity_defect(w, args.eps)
    _emit(payload, args.out)
    return EXIT_OK


def _policy(args, cfg: ExperimentConfig | None, geometry: SimGeometry) -> Policy:
    if args.policy == "nearest":
        return Policy.nearest_exit()
    if args.policy == "fixed":
        if not args.direction:
            raise UsageError("--policy fixed needs --direction")
        return Policy.fixed(args.direction)
    if args.solution is None or cfg is None:
        raise UsageError("--policy steepest needs --config and --solution")
    grid = build_problem(cfg).grid
    return Policy.steepest_descent(io.read_solution_csv(args.solution, grid))


def cmd_mc(args) -> int:
    cfg = _config(args) if args.config else None
    if cfg is not None:
        grid = build_problem(cfg).grid
        geometry = SimGeometry.from_grid(grid)
        h = grid.h
    else:
        geometry = SimGeometry.interval(0.0, 1.0)
        h = None
    policy = _policy(args, cfg, geometry)
    pc = PathConfig(dt=args.dt, T_max=args.T_max, seed=args.seed, N=args.paths, reference_h=h)
    est = estimate_value(geometry, policy, args.x0, pc, workers=args.workers)
    payload = {"estimate": est.to_dict(), "policy": args.policy}
    if cfg is not None:
        payload["config"] = cfg.echo()
    _emit(payload, args.out)
    return EXIT_OK if est.reliable else EXIT_FAIL


def cmd_convergence(args) -> int:
    rows = run_convergence(args.family, args.h, args.rule or InterfaceRule.RELAXED_MIN, args.alpha)
    if args.out_csv:
        io.write_table_csv(rows, args.out_csv)
    _emit({"family": args.family, "rows": rows}, args.out)
    return EXIT_OK


def _run_named(name: str, fast: bool, inject: bool) -> dict[str, Any]:
    return run_suite(name, fast=fast, inject_fault=inject).to_dict()


def cmd_suite(args) -> int:
    names = list(SUITES) if args.names == ["all"] else args.names
    for n in names:
        if n not in SUITES:
            raise UsageError(f"unknown suite {n!r}; choose from {', '.join(SUITES)} or 'all'")
    if args.parallel and len(names) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_named, names, [args.fast] * len(names),
                                    [args.inject_fault] * len(names)))
    else:
        results = [_run_named(n, args.fast, args.inject_fault) for n in names]
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['suite']} ({r['elapsed_seconds']:.1f} s)",
              file=sys.stderr)
        for c in r["checks"]:
            if not c["passed"]:
                print(f"  failed: {c['name']} value={c['value']} threshold={c['threshold']}",
                      file=sys.stderr)
    payload = {"passed": all(r["passed"] for r in results), "suites": results}
    _emit(payload, args.out)
    return EXIT_OK if payload["passed"] else EXIT_FAIL


def _add_config_flags(p: argparse.ArgumentParser, solution: bool = False) -> None:
    p.add_argument("--config", help="experiment JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry by dotted key, e.g. geometry.h=0.01")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--rule", choices=[r.value for r in InterfaceRule])
    p.add_argument("--out-dir", dest="out_dir")
    if solution:
        p.add_argument("--solution", required=True, help="solution CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transmission-hjb",
                                     description="Eikonal/elliptic transmission problems: solve, verify, simulate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the configured problem")
    _add_config_flags(p)
    p.add_argument("--out", help="solution CSV path")
    p.add_argument("--report", help="diagnostics JSON path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a solution CSV against the configured problem")
    _add_config_flags(p, solution=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle1d", help="closed-form solution of the 1D family")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, help="kink of a candidate (defaults to the solution's)")
    p.add_argument("--h", type=float)
    p.add_argument("--out", help="CSV of the function on the grid (needs --h)")
    p.add_argument("--report", help="JSON summary path")
    p.set_defaults(func=cmd_oracle1d)

    p = sub.add_parser("annulus", help="radial closed form on an annulus")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--R", type=float, default=2.0)
    p.add_argument("--rho", type=float, help="interface radius (default: canonical)")
    p.add_argument("--h", type=float)
    p.add_argument("--out", help="CSV of the radial profile (needs --h)")
    p.add_argument("--report", help="JSON summary path")
    p.set_defaults(func=cmd_annulus)

    p = sub.add_parser("regularize", help="tangential sup/inf-convolution of a solution")
    _add_config_flags(p, solution=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--mode", choices=["sup", "inf"], default="sup")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_regularize)

    p = sub.add_parser("mc", help="Monte Carlo exit-time estimate")
    _add_config_flags(p)
    p.add_argument("--policy", choices=["steepest", "fixed", "nearest"], default="steepest")
    p.add_argument("--solution", help="solution CSV for the steepest-descent policy")
    p.add_argument("--direction", type=float, nargs="+")
    p.add_argument("--x0", type=float, nargs="+", required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--T-max", dest="T_max", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("convergence", help="error table against a closed form")
    p.add_argument("--family", choices=["oracle1d", "eikonal_slab", "annulus_radial"], default="oracle1d")
    p.add_argument("--h", type=float, nargs="+", default=[1 / 50, 1 / 100, 1 / 200])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rule", choices=[r.value for r in InterfaceRule])
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("suite", help="run named validation suites")
    p.add_argument("names", nargs="+", help=f"one or more of {', '.join(SUITES)}, or 'all'")
    p.add_argument("--fast", action="store_true", help="smaller grids and path counts")
    p.add_argument("--inject-fault", dest="inject_fault", action="store_true",
                   help="corrupt the inputs so the suite must fail")
    p.add_argument("--parallel", action="store_true", help="run suites in separate processes")
    p.add_argument("--out", help="summary JSON path")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "x0", None) is not None:
        args.x0 = args.x0[0] if len(args.x0) == 1 else args.x0
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
