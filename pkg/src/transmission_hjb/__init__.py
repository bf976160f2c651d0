"""Solver, verifier and Monte Carlo cross-check for eikonal/elliptic transmission problems."""

from .closed_forms import (
    AnnulusSolution,
    ClosedForm1D,
    Infeasible,
    NoSolution,
    canonical_rho,
    candidate_1d,
    eval_1d,
    eval_annulus,
    solve_1d_family,
    solve_annulus,
)
from .errors import ConfigurationError, InfeasibleError, UsageError
from .geometry import Annulus, Box, Grid, GridFunction, Region, build_grid_1d, build_grid_2d, build_grid_radial
from .montecarlo import McEstimate, PathConfig, Policy, SimGeometry, estimate_value, simulate_path
from .operators import (
    FirstOrderOperator,
    SecondOrderOperator,
    SupportFunction,
    hopf_lax,
    pucci_minus,
    pucci_plus,
    support_value,
)
from .regularize import inf_convolution, semiconvexity_defect, sup_convolution
from .scheme import InterfaceRule, SolveDiagnostics, SolverConfig, TransmissionProblem, perron_solve, solve, sweep
from .verifier import Classification, VerificationReport, check_comparison, verify

__version__ = "0.1.0"

__all__ = [
    "Annulus", "AnnulusSolution", "Box", "Classification", "ClosedForm1D", "ConfigurationError",
    "FirstOrderOperator", "Grid", "GridFunction", "Infeasible", "InfeasibleError", "InterfaceRule",
    "McEstimate", "NoSolution", "PathConfig", "Policy", "Region", "SecondOrderOperator",
    "SimGeometry", "SolveDiagnostics", "SolverConfig", "SupportFunction", "TransmissionProblem",
    "UsageError", "VerificationReport", "build_grid_1d", "build_grid_2d", "build_grid_radial",
    "candidate_1d", "canonical_rho", "check_comparison", "estimate_value", "eval_1d",
    "eval_annulus", "hopf_lax", "inf_convolution", "perron_solve", "pucci_minus", "pucci_plus",
    "semiconvexity_defect", "simulate_path", "solve", "solve_1d_family", "solve_annulus",
    "sup_convolution", "support_value", "sweep", "verify",
]
