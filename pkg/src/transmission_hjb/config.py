"""
Validated experiment configuration and problem construction.

A configuration is a single JSON document with the sections ``geometry``,
``operators``, ``boundary``, ``solver``, ``verifier`` and ``outputs``. Unknown
keys are rejected before anything is computed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .closed_forms import AnnulusSolution, eval_1d, eval_annulus, solve_1d_family, solve_annulus
from .errors import ConfigurationError
from .geometry import Annulus, Box, Grid, build_grid_1d, build_grid_2d, build_grid_radial
from .operators import FirstOrderOperator, SecondOrderOperator
from .scheme import InterfaceRule, SolverConfig, TransmissionProblem


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class IntervalGeometry(_Strict):
    kind: Literal["interval"]
    h: float = Field(gt=0)
    a: float = -1.0
    b: float = 1.0
    interface: float = 0.0
    brownian_side: Literal["left", "right"] = "right"


class SlabGeometry(_Strict):
    kind: Literal["slab"]
    h: float = Field(gt=0)
    box: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    interface: float = 0.0
    brownian_side: Literal["upper", "lower"] = "upper"


class AnnulusGeometry(_Strict):
    kind: Literal["annulus"]
    h: float = Field(gt=0)
    r: float = Field(0.5, gt=0)
    R: float = 2.0
    rho: float = 1.5
    half_width: float | None = None


class RadialGeometry(_Strict):
    kind: Literal["radial"]
    h: float = Field(gt=0)
    r: float = Field(0.5, gt=0)
    R: float = 2.0
    rho: float = 1.5
    n: int = Field(2, ge=2)


GeometryOptions = Annotated[
    Union[IntervalGeometry, SlabGeometry, AnnulusGeometry, RadialGeometry],
    Field(discriminator="kind"),
]


class FirstOrderOptions(_Strict):
    form: Literal["eikonal", "shifted_eikonal"] = "eikonal"
    speed: float = Field(1.0, gt=0)
    center: list[float] | None = None


class SecondOrderOptions(_Strict):
    form: Literal["half_neg_laplacian", "affine"] = "half_neg_laplacian"
    rhs: float | str = 1.0
    diffusion: float = Field(0.5, gt=0)
    zeroth: float = Field(0.0, ge=0)
    lam: float | None = Field(None, alias="lambda")
    Lam: float | None = Field(None, alias="lambda_bar")


class OperatorOptions(_Strict):
    first_order: FirstOrderOptions = FirstOrderOptions()
    second_order: SecondOrderOptions = SecondOrderOptions()


class ConstantData(_Strict):
    kind: Literal["constant"]
    value: float = 0.0


class Oracle1DData(_Strict):
    kind: Literal["oracle1d"]
    alpha: float


class AnnulusData(_Strict):
    kind: Literal["annulus"]


class ExpressionData(_Strict):
    kind: Literal["expression"]
    expr: str


BoundaryOptions = Annotated[
    Union[ConstantData, Oracle1DData, AnnulusData, ExpressionData],
    Field(discriminator="kind"),
]


class SolverOptions(_Strict):
    rule: InterfaceRule = InterfaceRule.RELAXED_MIN
    tolerance: float = Field(1e-10, gt=0)
    max_sweeps: int = Field(100_000, ge=1)
    eta: float = Field(0.0, ge=0)


class VerifierOptions(_Strict):
    tolerance: float | None = Field(None, gt=0)
    rule: InterfaceRule | None = None


class OutputOptions(_Strict):
    directory: str = "."
    solution: str = "solution.csv"
    report: str = "report.json"


class ExperimentConfig(_Strict):
    geometry: GeometryOptions
    operators: OperatorOptions = OperatorOptions()
    boundary: BoundaryOptions = ConstantData(kind="constant")
    solver: SolverOptions = SolverOptions()
    verifier: VerifierOptions = VerifierOptions()
    outputs: OutputOptions = OutputOptions()

    @field_validator("boundary")
    @classmethod
    def _expression_parses(cls, v):
        if isinstance(v, ExpressionData):
            _parse_expression(v.expr, 2)
        return v

    def output_path(self, name: str) -> Path:
        return Path(self.outputs.directory) / getattr(self.outputs, name)

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


def load_config(source: str | Path | dict, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Read and validate a configuration, applying dotted-key overrides first."""
    if isinstance(source, dict):
        data = json.loads(json.dumps(source))
    else:
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {source}: {exc}") from exc
    for key, value in (overrides or {}).items():
        _set_dotted(data, key, value)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def _set_dotted(data: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"override {key!r} descends into a non-object")
    node[parts[-1]] = value


def _parse_expression(expr: str, dim: int):
    symbols = sympy.symbols(" ".join(f"x{k + 1}" for k in range(max(dim, 1))))
    symbols = symbols if isinstance(symbols, tuple) else (symbols,)
    try:
        parsed = sympy.sympify(expr, locals={str(s): s for s in symbols})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigurationError(f"cannot parse expression {expr!r}: {exc}") from exc
    unknown = parsed.free_symbols - set(symbols)
    if unknown:
        raise ConfigurationError(f"expression {expr!r} uses unknown symbols {sorted(map(str, unknown))}")
    return parsed, symbols


def expression_function(expr: str, dim: int):
    """Vectorized ``f(points)`` for an expression in ``x1, ..., x_dim``."""
    parsed, symbols = _parse_expression(expr, dim)
    fn = sympy.lambdify(symbols, parsed, modules="numpy")

    def evaluate(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = [pts[:, k] for k in range(dim)]
        return np.broadcast_to(np.asarray(fn(*cols), dtype=float), (pts.shape[0],)).copy()

    return evaluate


def build_grid(options) -> Grid:
    if isinstance(options, IntervalGeometry):
        return build_grid_1d(options.a, options.b, options.interface, options.h, options.brownian_side)
    if isinstance(options, SlabGeometry):
        return build_grid_2d(Box(*options.box), options.interface, options.h, options.brownian_side)
    if isinstance(options, AnnulusGeometry):
        return build_grid_2d(Annulus(options.r, options.R, options.half_width), options.rho, options.h)
    return build_grid_radial(options.r, options.R, options.rho, options.h, options.n)


def build_operators(cfg: ExperimentConfig) -> tuple[FirstOrderOperator, SecondOrderOperator]:
    fo = cfg.operators.first_order
    if fo.form == "eikonal":
        h_minus = FirstOrderOperator.eikonal(fo.speed)
    else:
        if fo.center is None:
            raise ConfigurationError("shifted_eikonal needs a center")
        h_minus = FirstOrderOperator.shifted_eikonal(fo.center, fo.speed)

    so = cfg.operators.second_order
    geom = cfg.geometry
    dim = 1 if isinstance(geom, (IntervalGeometry, RadialGeometry)) else 2
    rhs = so.rhs
    if isinstance(rhs, str):
        fn = expression_function(rhs, dim)
        rhs = lambda x, fn=fn: float(fn(np.atleast_1d(x))[0])  # noqa: E731
    a = 0.5 if so.form == "half_neg_laplacian" else so.diffusion
    drift = None
    if isinstance(geom, RadialGeometry):
        # radial reduction: a * (n - 1) / s * u' joins the second-derivative term
        coef = a * (geom.n - 1)
        drift = lambda x, coef=coef: np.atleast_1d(coef / np.asarray(x, dtype=float))  # noqa: E731
    h_plus = SecondOrderOperator(diffusion=a, rhs=rhs, drift=drift, zeroth=so.zeroth,
                                 lam=so.lam, Lam=so.Lam)
    return h_minus, h_plus


def annulus_oracle(cfg: ExperimentConfig) -> AnnulusSolution:
    geom = cfg.geometry
    if not isinstance(geom, (AnnulusGeometry, RadialGeometry)):
        raise ConfigurationError("annulus data needs an annulus or radial geometry")
    n = geom.n if isinstance(geom, RadialGeometry) else 2
    sol = solve_annulus(n, geom.r, geom.R, geom.rho)
    if not isinstance(sol, AnnulusSolution):
        raise ConfigurationError(f"annulus problem infeasible: {sol}")
    return sol


def boundary_values(cfg: ExperimentConfig, grid: Grid) -> np.ndarray:
    """Dirichlet data on every node (only BOUNDARY entries are used)."""
    options = cfg.boundary
    pts = grid.flat_coords()
    if isinstance(options, ConstantData):
        vals = np.full(grid.size, options.value)
    elif isinstance(options, Oracle1DData):
        if grid.dimension != 1 or grid.kind != "interval":
            raise ConfigurationError("oracle1d data needs an interval geometry")
        sol = solve_1d_family(options.alpha)
        # the family only fixes u(-1) = 0 and u(1) = alpha, even without a solution
        vals = np.where(pts[:, 0] > 0, options.alpha, 0.0)
        if sol.exists:
            vals = np.asarray(eval_1d(sol, np.clip(pts[:, 0], -1, 1)), dtype=float)
    elif isinstance(options, AnnulusData):
        sol = annulus_oracle(cfg)
        s = np.abs(pts[:, 0]) if grid.dimension == 1 else np.linalg.norm(pts, axis=1)
        vals = np.asarray(eval_annulus(sol, np.clip(s, sol.r, sol.R)), dtype=float)
    else:
        vals = expression_function(options.expr, grid.dimension)(pts)
    return vals.reshape(grid.shape)


def build_problem(cfg: ExperimentConfig) -> TransmissionProblem:
    grid = build_grid(cfg.geometry)
    h_minus, h_plus = build_operators(cfg)
    return TransmissionProblem(grid, h_minus, h_plus, boundary_values(cfg, grid), cfg.solver.eta)


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(cfg.solver.rule, cfg.solver.tolerance, cfg.solver.max_sweeps)
