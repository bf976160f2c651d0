"""
Monotone finite-difference scheme and fixed-point solvers.

Discrete equations, per node tag:

* EIKONAL: Godunov upwind update for ``|Du| = c - eta``;
* BROWNIAN: centred 2n-point stencil for
  ``a(-Laplacian u) - b(x).Du + c0 u = rhs(x) - eta``;
* INTERFACE: both candidates are formed from all axis neighbors; the relaxed
  rule keeps the smaller one, the strong rule keeps the eikonal one;
* BOUNDARY: pinned to the Dirichlet data.

One sweep is a Gauss-Seidel pass over the eikonal and interface nodes in every
diagonal ordering followed by an exact sparse solve of the Brownian block.
"""

from __future__ import annotations

import itertools
from collections import deque
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .errors import ConfigurationError
from .geometry import Grid, GridFunction, Region
from .operators import FirstOrderOperator, SecondOrderOperator


class InterfaceRule(str, Enum):
    RELAXED_MIN = "relaxed"
    STRONG_EIKONAL = "strong"


@dataclass
class TransmissionProblem:
    """Grid, both operators, Dirichlet data and the gap ``eta``.

    ``g`` is an array over the grid; only BOUNDARY entries are read.
    """

    grid: Grid
    h_minus: FirstOrderOperator
    h_plus: SecondOrderOperator
    g: np.ndarray
    eta: float = 0.0
    _disc: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.g = np.broadcast_to(np.asarray(self.g, dtype=float), self.grid.shape).copy()
        if self.eta < 0:
            raise ConfigurationError(f"gap eta must be >= 0, got {self.eta}")
        bnd = self.grid.tags == Region.BOUNDARY
        if not np.all(np.isfinite(self.g[bnd])):
            raise ConfigurationError("boundary data must be finite on BOUNDARY nodes")

    def with_gap(self, eta: float) -> TransmissionProblem:
        return TransmissionProblem(self.grid, self.h_minus, self.h_plus, self.g, eta)

    def with_data(self, g) -> TransmissionProblem:
        return TransmissionProblem(self.grid, self.h_minus, self.h_plus, g, self.eta)

    @property
    def speed(self) -> float:
        return self.h_minus.speed - self.eta

    def discretization(self) -> _Discretization:
        if self._disc is None:
            self._disc = _Discretization(self)
        return self._disc


@dataclass(frozen=True)
class SolverConfig:
    rule: InterfaceRule = InterfaceRule.RELAXED_MIN
    tolerance: float = 1e-10
    max_sweeps: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "rule", InterfaceRule(self.rule))
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be >= 1")


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    region_residuals: dict[str, float]
    last_change: float
    unreached_nodes: int = 0
    monotone: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "region_residuals": dict(self.region_residuals),
            "last_change": self.last_change,
            "unreached_nodes": self.unreached_nodes,
            "monotone": self.monotone,
        }


def godunov_update_eikonal(neighbor_values, h: float, c: float) -> float:
    """Upwind eikonal update from ``2n`` neighbor values ``(x1-, x1+, x2-, x2+, ...)``."""
    vals = np.asarray(neighbor_values, dtype=float).ravel()
    if vals.size % 2 or vals.size == 0:
        raise ConfigurationError("need two neighbor values per axis")
    if not (h > 0 and c > 0):
        raise ConfigurationError("h and c must be positive")
    return float(_kernels.godunov(vals, float(h), float(c)))


def _stencil_weights(op: SecondOrderOperator, x, h: float, n: int):
    if not op.is_stencil_supported:
        raise ConfigurationError("the stencil solver needs the affine second-order form")
    a = op.diffusion
    b = op.drift_at(x, n)
    if np.any(np.abs(b) * h > 2 * a * (1 + 1e-12)):
        raise ConfigurationError(
            f"drift {b} too large for a monotone centred stencil at h={h}; refine the grid")
    w = np.empty(2 * n)
    w[0::2] = a / h**2 - b / (2 * h)
    w[1::2] = a / h**2 + b / (2 * h)
    centre = 2 * n * a / h**2 + op.zeroth
    return w, centre


def elliptic_update(neighbor_values, h: float, op: SecondOrderOperator,
                    z_current: float | None = None, x=None, eta: float = 0.0) -> float:
    """Centre value solving the stencil equation for the affine operator.

    ``z_current`` is accepted for interface symmetry; the affine form makes
    the update independent of it.
    """
    vals = np.asarray(neighbor_values, dtype=float).ravel()
    n = vals.size // 2
    if x is None:
        x = np.zeros(n)
    w, centre = _stencil_weights(op, x, h, n)
    return float((w @ vals + op.rhs_at(x) - eta) / centre)


def interface_update(rule: InterfaceRule, eikonal_candidate: float, elliptic_candidate: float) -> float:
    rule = InterfaceRule(rule)
    if rule == InterfaceRule.STRONG_EIKONAL:
        return float(eikonal_candidate)
    return float(min(eikonal_candidate, elliptic_candidate))


class _Discretization:
    """Precomputed neighbor tables, stencil weights and the Brownian LU factors."""

    def __init__(self, problem: TransmissionProblem):
        grid = problem.grid
        if not problem.h_minus.is_stencil_supported:
            raise ConfigurationError("the stencil solver supports the eikonal first-order form only")
        if not problem.speed > 0:
            raise ConfigurationError(f"effective speed c - eta must be positive, got {problem.speed}")
        n = grid.dimension
        self.n = n
        self.h = grid.h
        self.c = problem.speed
        tags = grid.tags.ravel()
        self.tags = tags
        self.nbr = grid.neighbor_table()
        N = grid.size
        self.W = np.zeros((N, 2 * n))
        self.C = np.ones(N)
        self.R = np.zeros(N)
        ell_nodes = np.flatnonzero((tags == Region.BROWNIAN) | (tags == Region.INTERFACE))
        xs = grid.flat_coords()
        op = problem.h_plus
        for idx in ell_nodes:
            if np.any(self.nbr[idx] < 0) or np.any(tags[self.nbr[idx]] == Region.EXTERIOR):
                raise ConfigurationError(f"node {idx} lacks a full stencil")
            w, centre = _stencil_weights(op, xs[idx], self.h, n)
            self.W[idx] = w
            self.C[idx] = centre
            self.R[idx] = op.rhs_at(xs[idx]) - problem.eta
        self.is_iface = tags == Region.INTERFACE
        self.boundary = np.flatnonzero(tags == Region.BOUNDARY)
        self.eik_nodes = np.flatnonzero((tags == Region.EIKONAL) | self.is_iface)
        for idx in np.flatnonzero(tags == Region.EIKONAL):
            if np.any(tags[self.nbr[idx][self.nbr[idx] >= 0]] == Region.EXTERIOR):
                raise ConfigurationError(f"eikonal node {idx} touches an exterior node")
        self.brown = np.flatnonzero(tags == Region.BROWNIAN)
        self.active = np.flatnonzero((tags != Region.BOUNDARY) & (tags != Region.EXTERIOR))
        kind = np.zeros(N, dtype=np.int64)
        kind[tags == Region.BROWNIAN] = 1
        kind[self.is_iface] = 2
        self.active_kinds = kind[self.active]
        self.orders = self._orderings(grid)
        self._factor_brownian()

    def _orderings(self, grid: Grid) -> list[np.ndarray]:
        idx = np.arange(grid.size).reshape(grid.shape)
        mask = np.zeros(grid.size, dtype=bool)
        mask[self.eik_nodes] = True
        mask = mask.reshape(grid.shape)
        orders = []
        for flips in itertools.product((False, True), repeat=grid.dimension):
            view_idx, view_mask = idx, mask
            for k, f in enumerate(flips):
                if f:
                    view_idx = np.flip(view_idx, axis=k)
                    view_mask = np.flip(view_mask, axis=k)
            orders.append(np.ascontiguousarray(view_idx[view_mask]).astype(np.int64))
        return orders

    def _factor_brownian(self):
        nb = self.brown.size
        if nb == 0:
            self.lu = None
            return
        pos = -np.ones(self.tags.size, dtype=np.int64)
        pos[self.brown] = np.arange(nb)
        rows, cols, vals = [np.arange(nb)], [np.arange(nb)], [self.C[self.brown]]
        krows, kcols, kvals = [], [], []
        for j in range(self.nbr.shape[1]):
            q = self.nbr[self.brown, j]
            w = self.W[self.brown, j]
            inside = pos[q] >= 0
            rows.append(np.flatnonzero(inside))
            cols.append(pos[q[inside]])
            vals.append(-w[inside])
            krows.append(np.flatnonzero(~inside))
            kcols.append(q[~inside])
            kvals.append(w[~inside])
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nb, nb))
        self.lu = splu(A)
        self.K = sp.csr_matrix((np.concatenate(kvals), (np.concatenate(krows), np.concatenate(kcols))),
                               shape=(nb, self.tags.size))

    def solve_brownian(self, u: np.ndarray) -> float:
        if self.lu is None:
            return 0.0
        new = self.lu.solve(self.R[self.brown] + self.K @ u)
        change = float(np.abs(new - u[self.brown]).max())
        u[self.brown] = new
        return change

    def relax(self, u: np.ndarray, strong: bool) -> float:
        change = 0.0
        for order in self.orders:
            change = max(change, _kernels.relax_pass(
                u, order, self.nbr, self.is_iface, self.W, self.C, self.R,
                self.h, self.c, strong))
        return change

    def updates(self, u: np.ndarray, strong: bool) -> np.ndarray:
        return _kernels.jacobi_updates(u, self.active, self.active_kinds, self.nbr,
                                       self.W, self.C, self.R, self.h, self.c, strong)


def _start(problem: TransmissionProblem, fill: float) -> np.ndarray:
    u = np.full(problem.grid.size, fill)
    tags = problem.grid.tags.ravel()
    bnd = tags == Region.BOUNDARY
    u[bnd] = problem.g.ravel()[bnd]
    u[tags == Region.EXTERIOR] = 0.0
    return u


def _as_gridfunction(problem: TransmissionProblem, u: np.ndarray) -> GridFunction:
    return GridFunction(problem.grid, u.reshape(problem.grid.shape).copy())


def sweep(u: GridFunction, problem: TransmissionProblem,
          config: SolverConfig | None = None) -> tuple[GridFunction, float]:
    """One full sweep; returns the new function and the max nodal change."""
    config = config or SolverConfig()
    disc = problem.discretization()
    v = u.values.ravel().astype(float).copy()
    old = v.copy()
    disc.relax(v, config.rule == InterfaceRule.STRONG_EIKONAL)
    disc.solve_brownian(v)
    change = float(np.abs(v - old).max(initial=0.0))
    return _as_gridfunction(problem, v), change


def lift_elliptic(u: GridFunction, problem: TransmissionProblem) -> GridFunction:
    """Replace BROWNIAN values by the Dirichlet solve with data ``u`` elsewhere."""
    disc = problem.discretization()
    v = u.values.ravel().astype(float).copy()
    disc.solve_brownian(v)
    return _as_gridfunction(problem, v)


def residuals(u: GridFunction, problem: TransmissionProblem,
              rule: InterfaceRule = InterfaceRule.RELAXED_MIN) -> np.ndarray:
    """Signed fixed-point residual ``u - update(u)`` on the grid (0 off active nodes)."""
    disc = problem.discretization()
    v = u.values.ravel().astype(float)
    out = np.zeros(problem.grid.size)
    out[disc.active] = v[disc.active] - disc.updates(v, InterfaceRule(rule) == InterfaceRule.STRONG_EIKONAL)
    return out.reshape(problem.grid.shape)


def _region_residuals(res: np.ndarray, grid: Grid) -> dict[str, float]:
    out = {}
    for reg in (Region.EIKONAL, Region.BROWNIAN, Region.INTERFACE):
        m = grid.tags == reg
        out[reg.name] = float(np.abs(res[m]).max()) if np.any(m) else 0.0
    return out


def _iterate(problem: TransmissionProblem, config: SolverConfig, u: np.ndarray,
             direction: int) -> tuple[GridFunction, SolveDiagnostics]:
    """Sweep to a fixed point.

    Stopping uses the a-posteriori bound ``change / (1 - q)`` on the
    distance to the fixed point, with ``q`` the largest contraction ratio
    observed over the last few sweeps.
    ``direction`` is -1 for iterations from above and +1 from below; it only
    feeds the monotonicity flag.
    """
    disc = problem.discretization()
    strong = config.rule == InterfaceRule.STRONG_EIKONAL
    prev_change = math.inf
    change = math.inf
    ratios: deque[float] = deque(maxlen=8)
    roundoff = 16 * np.finfo(float).eps * math.sqrt(u.size)
    monotone = True
    converged = False
    it = 0
    for it in range(1, config.max_sweeps + 1):
        old = u.copy()
        disc.relax(u, strong)
        disc.solve_brownian(u)
        diff = u - old
        change = float(np.abs(diff).max(initial=0.0))
        slack = 1e-12 * max(1.0, float(np.abs(old).max(initial=0.0)))
        if direction > 0 and diff.min(initial=0.0) < -slack:
            monotone = False
        if direction < 0 and diff.max(initial=0.0) > slack:
            monotone = False
        if change <= roundoff * max(1.0, float(np.abs(u).max(initial=0.0))):
            # multi-dimensional upwind updates can cycle in the last bits
            converged = True
            break
        ratios.append(change / prev_change if prev_change > 0 else 1.0)
        prev_change = change
        q = max(ratios)
        if len(ratios) == ratios.maxlen and q < 1.0:
            if change / (1.0 - q) <= config.tolerance:
                converged = True
                break
    gf = _as_gridfunction(problem, u)
    res = residuals(gf, problem, config.rule)
    big = 0.5 * _surrogate(problem)
    unreached = int(np.count_nonzero(u[disc.active] >= big)) if direction < 0 else 0
    final = float(np.abs(res).max(initial=0.0))
    diag = SolveDiagnostics(
        iterations=it,
        final_residual=final,
        converged=bool(converged and final <= config.tolerance and unreached == 0),
        region_residuals=_region_residuals(res, problem.grid),
        last_change=change,
        unreached_nodes=unreached,
        monotone=monotone,
    )
    return gf, diag


def _surrogate(problem: TransmissionProblem) -> float:
    bnd = problem.grid.tags == Region.BOUNDARY
    gmax = float(np.abs(problem.g[bnd]).max(initial=0.0))
    return 1e6 * max(1.0, gmax)


def solve(problem: TransmissionProblem, config: SolverConfig | None = None,
          initial: GridFunction | None = None) -> tuple[GridFunction, SolveDiagnostics]:
    """Fixed point of :func:`sweep`, iterated from a large constant above."""
    config = config or SolverConfig()
    u = _start(problem, _surrogate(problem)) if initial is None else initial.values.ravel().astype(float).copy()
    return _iterate(problem, config, u, direction=-1)


def perron_solve(problem: TransmissionProblem, config: SolverConfig | None = None,
                 initial: GridFunction | None = None) -> tuple[GridFunction, SolveDiagnostics]:
    """Alternate eikonal sweeps and elliptic lifts upward from a sub-solution.

    The default start is the constant ``min(0, min g)``, a sub-solution when
    the right-hand side is non-negative.
    """
    config = config or SolverConfig()
    if initial is None:
        bnd = problem.grid.tags == Region.BOUNDARY
        low = min(0.0, float(problem.g[bnd].min(initial=0.0)))
        u = _start(problem, low)
    else:
        u = initial.values.ravel().astype(float).copy()
    return _iterate(problem, config, u, direction=1)
