"""
Convergence tables and named validation suites.

Each suite runs a block of checks against closed-form solutions or
statistical references and returns a :class:`SuiteResult` whose ``passed``
flag is the conjunction of its checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .closed_forms import (
    AnnulusSolution,
    candidate_1d,
    distance_to_square_boundary,
    eval_1d,
    eval_annulus,
    solve_1d_family,
    solve_annulus,
)
from .errors import ConfigurationError
from .geometry import Annulus, Box, Grid, GridFunction, Region, build_grid_1d, build_grid_2d, build_grid_radial
from .montecarlo import PathConfig, Policy, SimGeometry, estimate_value
from .operators import FirstOrderOperator, SecondOrderOperator
from .regularize import inf_convolution, semiconvexity_defect, sup_convolution
from .scheme import InterfaceRule, SolverConfig, TransmissionProblem, solve
from .verifier import Classification, check_comparison, verify

ORACLE_ALPHAS = (2.0, 1.0, 0.5, -0.5, -1.0, -2.0)
ACCEPTANCE_ALPHAS = (2.0, 1.0, -1.0)
NO_SOLUTION_BETAS = (-1.0, -0.75, -0.5, -0.25, 0.0)
REFINEMENT = (1 / 50, 1 / 100, 1 / 200)
ANNULUS = {"n": 2, "r": 0.5, "R": 2.0, "rho": 1.5}
SUITES = ("oracles1d", "annulus", "strong-vs-relaxed", "comparison", "regularize", "mc")


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


@dataclass
class SuiteResult:
    name: str
    checks: list[Check]
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.name, "passed": self.passed, "elapsed_seconds": self.elapsed,
                "checks": [c.to_dict() for c in self.checks]}


# problem builders

def model_problem_1d(h: float, alpha: float = 0.0, rhs: float = 0.0) -> TransmissionProblem:
    """Eikonal on ``(-1, 0)``, ``-(1/2) u''`` on ``(0, 1)``, data ``u(-1) = 0``, ``u(1) = alpha``."""
    grid = build_grid_1d(-1.0, 1.0, 0.0, h)
    g = np.where(grid.axis(0) > 0, alpha, 0.0)
    return TransmissionProblem(grid, FirstOrderOperator.eikonal(),
                               SecondOrderOperator.half_neg_laplacian(rhs), g)


def radial_problem(h: float, n: int = 2, r: float = 0.5, R: float = 2.0, rho: float = 1.5) -> TransmissionProblem:
    grid = build_grid_radial(r, R, rho, h, n)
    a = 0.5
    op = SecondOrderOperator(diffusion=a, rhs=1.0, drift=lambda s: np.atleast_1d(a * (n - 1) / s))
    return TransmissionProblem(grid, FirstOrderOperator.eikonal(), op, 0.0)


def annulus_problem_2d(h: float, sol: AnnulusSolution) -> TransmissionProblem:
    """Embedded annulus with boundary data taken from the radial solution."""
    grid = build_grid_2d(Annulus(sol.r, sol.R), sol.rho, h)
    s = np.linalg.norm(grid.coords(), axis=-1)
    g = np.asarray(eval_annulus(sol, np.clip(s, sol.r, sol.R)), dtype=float)
    return TransmissionProblem(grid, FirstOrderOperator.eikonal(),
                               SecondOrderOperator.half_neg_laplacian(1.0), g)


def eikonal_box_grid(h: float, half_width: float = 1.0) -> Grid:
    """Square ``[-w, w]^2`` made of eikonal nodes only."""
    m = int(round(2 * half_width / h))
    tags = np.full((m + 1, m + 1), int(Region.EIKONAL), dtype=np.int8)
    tags[0, :] = tags[-1, :] = tags[:, 0] = tags[:, -1] = Region.BOUNDARY
    return Grid(h=h, origin=(-half_width, -half_width), tags=tags, kind="box",
                interface_level=None, params={"half_width": half_width})


# convergence

def _observed_orders(rows: list[dict[str, Any]]) -> None:
    for prev, row in zip(rows, rows[1:]):
        if prev["error"] > 0 and row["error"] > 0:
            row["order"] = math.log(prev["error"] / row["error"]) / math.log(prev["h"] / row["h"])
        else:
            row["order"] = math.inf


def run_convergence(family: str, hs, rule: InterfaceRule | str = InterfaceRule.RELAXED_MIN,
                    alpha: float = 1.0) -> list[dict[str, Any]]:
    """Rows ``(h, error, order)`` of L-infinity errors against a closed form.

    Families: ``"oracle1d"`` (parameter ``alpha``), ``"eikonal_slab"``
    (distance to the boundary of the unit square) and ``"annulus_radial"``.
    ``order`` is absent when there is a single ``h``.
    """
    rule = InterfaceRule(rule)
    hs = [float(h) for h in hs]
    if not hs:
        raise ConfigurationError("need at least one grid spacing")
    rows = []
    for h in hs:
        t0 = time.perf_counter()
        if family == "oracle1d":
            sol = solve_1d_family(alpha)
            if not sol.exists:
                raise ConfigurationError(f"no closed form for alpha = {alpha}")
            pb = model_problem_1d(h, alpha)
            u, diag = solve(pb, SolverConfig(rule))
            exact = eval_1d(sol, pb.grid.axis(0))
        elif family == "eikonal_slab":
            grid = eikonal_box_grid(h)
            pb = TransmissionProblem(grid, FirstOrderOperator.eikonal(),
                                     SecondOrderOperator.half_neg_laplacian(), 0.0)
            u, diag = solve(pb, SolverConfig(rule))
            exact = distance_to_square_boundary(grid.coords())
        elif family == "annulus_radial":
            sol = solve_annulus(**ANNULUS)
            pb = radial_problem(h, **ANNULUS)
            u, diag = solve(pb, SolverConfig(rule))
            exact = eval_annulus(sol, pb.grid.axis(0))
        else:
            raise ConfigurationError(f"no closed-form oracle for family {family!r}")
        err = float(np.max(np.abs(u.values - np.reshape(exact, u.values.shape))[u.mask]))
        rows.append({"h": h, "error": err, "iterations": diag.iterations,
                     "converged": diag.converged, "seconds": time.perf_counter() - t0})
    if len(rows) > 1:
        _observed_orders(rows)
    return rows


# suites

def _timed(fn: Callable, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _sup_error(u: GridFunction, exact) -> float:
    return float(np.max(np.abs(u.values - np.reshape(exact, u.values.shape))[u.mask]))


def _warm_up() -> None:
    solve(model_problem_1d(0.1, 1.0), SolverConfig())


def suite_oracles1d(fast: bool = False, inject_fault: bool = False) -> list[Check]:
    """Closed-form reproduction, verifier soundness and no-solution detection in 1D."""
    _warm_up()
    checks = []
    h = 1 / 200
    for alpha in ACCEPTANCE_ALPHAS:
        pb = model_problem_1d(h, alpha)
        (u, diag), secs = _timed(solve, pb, SolverConfig())
        err = _sup_error(u, eval_1d(solve_1d_family(alpha), pb.grid.axis(0)))
        checks.append(Check(f"solve alpha={alpha:g} h=1/200 error", err <= 2 * h, err, 2 * h,
                            {"iterations": diag.iterations}))
        checks.append(Check(f"solve alpha={alpha:g} h=1/200 runtime", secs < 1.0, secs, 1.0))

    hs = REFINEMENT[:1] if fast else REFINEMENT
    for hh in hs:
        grid = build_grid_1d(-1.0, 1.0, 0.0, hh)
        x = grid.axis(0)
        for alpha in ORACLE_ALPHAS:
            pb = model_problem_1d(hh, alpha)
            u = GridFunction(grid, eval_1d(solve_1d_family(alpha), x))
            if inject_fault:
                u.values[len(x) // 4] += 0.5
            rep = verify(u, pb, tol=10 * hh)
            checks.append(Check(f"oracle alpha={alpha:g} h={hh:.4g} passes verify", rep.passed,
                                rep.worst_violation, rep.tolerance, {"worst_location": rep.worst_location}))

    residuals: dict[float, list[float]] = {b: [] for b in NO_SOLUTION_BETAS}
    for hh in hs:
        grid = build_grid_1d(-1.0, 1.0, 0.0, hh)
        pb = model_problem_1d(hh, -3.0)
        iface = int(np.flatnonzero(grid.tags == Region.INTERFACE)[0])
        for beta in NO_SOLUTION_BETAS:
            u = GridFunction(grid, candidate_1d(-3.0, beta, grid.axis(0)))
            rep = verify(u, pb, tol=10 * hh)
            cls = Classification(int(rep.classification.ravel()[iface]))
            res = float(rep.residual.ravel()[iface])
            residuals[beta].append(res)
            checks.append(Check(f"alpha=-3 beta={beta:g} h={hh:.4g} interface SUB_VIOLATION",
                                cls == Classification.SUB_VIOLATION and res >= 0.5, res, 0.5,
                                {"classification": cls.name}))
    for beta, vals in residuals.items():
        spread = max(vals) - min(vals)
        checks.append(Check(f"alpha=-3 beta={beta:g} residual stable across h", spread <= 0.1 * min(vals),
                            spread, 0.1 * min(vals), {"residuals": vals}))

    checks.extend(_constructed_non_solutions(1 / 50))
    return checks


def _constructed_non_solutions(h: float) -> list[Check]:
    grid = build_grid_1d(-1.0, 1.0, 0.0, h)
    x = grid.axis(0)
    cases = {
        "alpha=-3 beta=-1 candidate": (model_problem_1d(h, -3.0), candidate_1d(-3.0, -1.0, x)),
        "zero field with unit source": (model_problem_1d(h, 0.0, rhs=1.0), np.zeros_like(x)),
        "sine field": (model_problem_1d(h, 0.0, rhs=1.0), 0.4 * np.sin(3 * np.pi * x)),
    }
    checks = []
    for name, (pb, vals) in cases.items():
        rep = verify(GridFunction(grid, vals), pb, tol=10 * h)
        checks.append(Check(f"non-solution '{name}' fails verify", not rep.passed,
                            rep.worst_violation, rep.tolerance))
    return checks


def suite_annulus(fast: bool = False, inject_fault: bool = False) -> list[Check]:
    checks = []
    sol = solve_annulus(**ANNULUS)
    worst_constraint = float(np.max(np.abs(sol.residuals)))
    checks.append(Check("annulus constraint residuals", worst_constraint <= 1e-12, worst_constraint, 1e-12))
    hs = REFINEMENT[:1] if fast else REFINEMENT
    for h in hs:
        pb = radial_problem(h, **ANNULUS)
        u, _ = solve(pb, SolverConfig())
        if inject_fault:
            u.values[len(u.values) // 2] += 0.5
        err = _sup_error(u, eval_annulus(sol, pb.grid.axis(0)))
        checks.append(Check(f"radial solve h={h:.4g} error", err <= 5 * h, err, 5 * h))
        exact = GridFunction(pb.grid, eval_annulus(sol, pb.grid.axis(0)))
        rep = verify(exact, pb, tol=10 * h)
        checks.append(Check(f"annulus oracle h={h:.4g} passes verify", rep.passed,
                            rep.worst_violation, rep.tolerance))
    if not fast:
        h2 = 0.025
        pb = annulus_problem_2d(h2, sol)
        grid = pb.grid
        s = np.linalg.norm(grid.coords(), axis=-1)
        for rule in InterfaceRule:
            u, _ = solve(pb, SolverConfig(rule))
            err = _sup_error(u, np.asarray(eval_annulus(sol, np.clip(s, sol.r, sol.R))))
            checks.append(Check(f"2D annulus {grid.shape[0]}x{grid.shape[1]} {rule.name} error",
                                err <= 0.05, err, 0.05))
    return checks


def suite_strong_vs_relaxed(fast: bool = False, inject_fault: bool = False) -> list[Check]:
    checks = []
    hs = REFINEMENT[:1] if fast else REFINEMENT
    for h in hs:
        problems = [(f"1D alpha={a:g}", model_problem_1d(h, a)) for a in ACCEPTANCE_ALPHAS]
        problems.append(("radial annulus", radial_problem(h, **ANNULUS)))
        for name, pb in problems:
            ur, _ = solve(pb, SolverConfig(InterfaceRule.RELAXED_MIN))
            us, _ = solve(pb, SolverConfig(InterfaceRule.STRONG_EIKONAL))
            if inject_fault:
                us.values[len(us.values.ravel()) // 3] += 0.5
            diff = float(np.abs(ur.values - us.values)[ur.mask].max())
            checks.append(Check(f"{name} h={h:.4g} relaxed vs strong", diff <= 2 * h, diff, 2 * h))
    return checks


def random_comparison_pair(rng: np.random.Generator, h: float = 1 / 50):
    """Sub-solution of a gap problem and super-solution with larger boundary data.

    Returns ``(u, v, gap_problem)``.
    """
    eta = float(rng.uniform(0.05, 0.5))
    rhs = float(rng.uniform(0.0, 2.0))
    if rng.random() < 0.5:
        grid = build_grid_1d(-1.0, 1.0, 0.0, h)
    else:
        grid = build_grid_2d(Box(-1.0, 1.0, -1.0, 1.0), 0.0, 2 * h if h < 0.05 else h)
    x = grid.coords()
    bump = sum(rng.uniform(-0.5, 0.5) * np.sin((k + 1) * np.pi * x[..., -1] + rng.uniform(0, 2 * np.pi))
               for k in range(3))
    if grid.dimension == 2:
        bump = bump + rng.uniform(-0.5, 0.5) * np.cos(np.pi * x[..., 0])
    g_u = bump
    g_v = g_u + rng.uniform(0.0, 0.5) * (1 + np.cos(np.pi * x[..., 0] * rng.uniform(0.5, 2)))
    base = TransmissionProblem(grid, FirstOrderOperator.eikonal(),
                               SecondOrderOperator.half_neg_laplacian(rhs), g_v)
    gap = base.with_data(g_u).with_gap(eta)
    u, _ = solve(gap, SolverConfig())
    v, _ = solve(base, SolverConfig())
    return u, v, gap


def suite_comparison(fast: bool = False, inject_fault: bool = False, trials: int | None = None,
                     seed: int = 2024) -> list[Check]:
    trials = trials if trials is not None else (20 if fast else 100)
    rng = np.random.default_rng(seed)
    worst, failures = -math.inf, []
    for t in range(trials):
        u, v, gap = random_comparison_pair(rng)
        if inject_fault:
            interior = np.flatnonzero(u.grid.tags.ravel() == Region.EIKONAL)
            u.values.ravel()[interior[len(interior) // 2]] += 1.0
        rep = check_comparison(u, v, gap, tol=1e-8, check_preconditions=False)
        worst = max(worst, rep.worst_margin)
        if not rep.passed:
            failures.append({"trial": t, "margin": rep.worst_margin, "node": list(rep.worst_node)})
    return [Check(f"discrete comparison over {trials} random pairs", not failures, worst, 1e-8,
                  {"violations": failures})]


def _lipschitz_fields(h: float):
    grid = build_grid_2d(Box(-1.0, 1.0, -1.0, 1.0), 0.0, h)
    x = grid.coords()
    return grid, {
        "abs": (np.abs(x[..., 0]) + 0.2 * x[..., 1], 1.0),
        "cone": (1.0 - np.abs(x[..., 0] - 0.3), 1.0),
        "sine": (0.5 * np.sin(2 * x[..., 0]) * np.cos(x[..., 1]), 1.0),
    }


def suite_regularize(fast: bool = False, inject_fault: bool = False) -> list[Check]:
    checks = []
    h = 1 / 40 if fast else 1 / 80
    grid, fields = _lipschitz_fields(h)
    for name, (vals, lip) in fields.items():
        u = GridFunction(grid, vals)
        for eps in (0.02, 0.05, 0.1):
            up = sup_convolution(u, eps)
            um = inf_convolution(u, eps)
            if inject_fault:
                up.values[up.mask] -= 1.0
            defect = semiconvexity_defect(up, eps)
            checks.append(Check(f"{name} eps={eps:g} semiconvexity", defect >= -10 * h, defect, -10 * h))
            m = up.mask
            dist = float(np.abs(up.values - u.values)[m].max())
            bound = lip**2 * eps / 2 + 2 * h
            checks.append(Check(f"{name} eps={eps:g} distance to u", dist <= bound, dist, bound))
            below = float((u.values - up.values)[m].max())
            above = float((um.values - u.values)[um.mask].max())
            checks.append(Check(f"{name} eps={eps:g} ordering inf <= u <= sup",
                                below <= 1e-12 and above <= 1e-12, max(below, above), 1e-12))
            if eps < 0.1:
                bigger = sup_convolution(u, 2 * eps)
                both = m & bigger.mask
                gap = float((up.values - bigger.values)[both].max())
                checks.append(Check(f"{name} eps={eps:g} monotone in eps", gap <= 1e-12, gap, 1e-12))
    return checks


def mc_transmission_reference(h: float = 1 / 50) -> GridFunction:
    """Strong-rule PDE solution of the model transmission problem with unit source."""
    u, _ = solve(model_problem_1d(h, 0.0, rhs=1.0), SolverConfig(InterfaceRule.STRONG_EIKONAL))
    return u


def suite_mc(fast: bool = False, inject_fault: bool = False, workers: int = 1) -> list[Check]:
    checks = []
    N = 10_000 if fast else 100_000
    seed = 42
    pure = estimate_value(SimGeometry.interval(0.0, 1.0), Policy.nearest_exit(), 0.5,
                          PathConfig(dt=1e-4, N=N, seed=seed), workers=workers)
    z = abs(pure.mean - 0.25) / pure.standard_error
    checks.append(Check("pure Brownian exit time at 0.5", z <= 3 and pure.reliable, z, 3.0, pure.to_dict()))

    h = 1 / 50
    u = mc_transmission_reference(h)
    geo = SimGeometry.from_grid(u.grid)
    x = u.grid.axis(0)
    i0 = int(np.argmin(np.abs(x - 0.5)))
    policy = Policy.steepest_descent(u)
    if inject_fault:
        policy = Policy.fixed([1.0])
    est = estimate_value(geo, policy, 0.5, PathConfig(dt=1e-4, N=N, seed=seed, reference_h=h),
                         workers=workers)
    z = abs(est.mean - u.values[i0]) / est.standard_error
    checks.append(Check("steepest-descent estimate at 0.5 vs PDE", z <= 3 and est.reliable, z, 3.0,
                        {"pde": float(u.values[i0]), **est.to_dict()}))

    j0 = int(np.argmin(np.abs(x + 0.5)))
    bad = estimate_value(geo, Policy.fixed([1.0]), -0.5, PathConfig(dt=1e-4, N=2_000, seed=seed),
                         workers=workers)
    z = (bad.mean - u.values[j0]) / bad.standard_error
    checks.append(Check("misdirected fixed policy at -0.5 exceeds PDE", z > 3, z, 3.0,
                        {"pde": float(u.values[j0]), **bad.to_dict()}))
    return checks


_SUITES: dict[str, Callable[..., list[Check]]] = {
    "oracles1d": suite_oracles1d,
    "annulus": suite_annulus,
    "strong-vs-relaxed": suite_strong_vs_relaxed,
    "comparison": suite_comparison,
    "regularize": suite_regularize,
    "mc": suite_mc,
}


def run_suite(name: str, fast: bool = False, inject_fault: bool = False, **kwargs) -> SuiteResult:
    """Run one named suite; ``inject_fault`` corrupts its inputs to prove the checks bite."""
    if name not in _SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    checks = _SUITES[name](fast=fast, inject_fault=inject_fault, **kwargs)
    return SuiteResult(name, checks, time.perf_counter() - t0)
