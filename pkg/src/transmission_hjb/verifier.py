"""
Discrete viscosity-solution checks.

Interior nodes are tested with the residual of the monotone scheme, split
into a sub part (the node value exceeds its update) and a super part (the
node value falls below it). Interface nodes are tested on the normal line
through the node: one-sided normal slopes from both sides bound the slopes of
test functions that can touch the candidate, and the first-order operator is
evaluated over that slope interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .geometry import Grid, GridFunction, Region
from .operators import FirstOrderOperator, eval_first_order
from .scheme import InterfaceRule, TransmissionProblem

log = logging.getLogger(__name__)

SLOPE_SAMPLES = 101
KINK_CURVATURE = 10.0


class Classification(IntEnum):
    PASS = 0
    SUB_VIOLATION = 1
    SUPER_VIOLATION = 2


@dataclass(frozen=True)
class OneSidedJet:
    """Value, tangential gradient and one-sided normal slopes at an interface node.

    ``a`` is the slope along the normal from the eikonal side, ``b`` from the
    Brownian side; the normal points into the Brownian side.
    """

    z: float
    q: np.ndarray
    a: float
    b: float
    tangential_second: np.ndarray
    normal: np.ndarray
    x: np.ndarray

    def gradient(self, p_normal: float) -> np.ndarray:
        """Gradient with tangential part ``q`` and normal component ``p_normal``."""
        g = self.normal * p_normal
        g[:-1] += self.q
        return g


@dataclass(frozen=True)
class InterfaceCheck:
    classification: Classification
    residual: float
    angle: str
    sub_residual: float
    super_residual: float | None


def _interface_supported(grid: Grid) -> bool:
    return grid.interface_level is not None


def _normal(grid: Grid) -> np.ndarray:
    nu = np.zeros(grid.dimension)
    nu[-1] = float(grid.normal_sign)
    return nu


def jets_at_interface(u: GridFunction, node: tuple[int, ...]) -> OneSidedJet | None:
    """One-sided jet at an INTERFACE node; ``None`` when the stencil is incomplete.

    Normal slopes are second-order one-sided differences built from the three
    nearest nodes on each side, extrapolated to the interface; the interface
    value itself is not used, so the slopes are insensitive to the O(h)
    perturbation the discrete interface rule leaves at that node.
    """
    grid = u.grid
    node = tuple(int(i) for i in node)
    if grid.tags[node] != Region.INTERFACE:
        raise ConfigurationError(f"node {node} is not an INTERFACE node")
    if not _interface_supported(grid):
        return None
    h = grid.h
    sign = grid.normal_sign
    last = node[-1]
    vals = {}
    for k in (-3, -2, -1, 1, 2, 3):
        j = last + sign * k
        if not 0 <= j < grid.shape[-1]:
            log.warning("interface node %s lacks a normal stencil", node)
            return None
        idx = node[:-1] + (j,)
        if grid.tags[idx] == Region.EXTERIOR or not u.mask[idx]:
            log.warning("interface node %s lacks a normal stencil", node)
            return None
        vals[k] = u.values[idx]
    a = (5 * vals[-1] - 8 * vals[-2] + 3 * vals[-3]) / (2 * h)
    b = (-5 * vals[1] + 8 * vals[2] - 3 * vals[3]) / (2 * h)
    n = grid.dimension
    q = np.zeros(n - 1)
    d2 = np.zeros(n - 1)
    for k in range(n - 1):
        lo = list(node)
        hi = list(node)
        lo[k] -= 1
        hi[k] += 1
        if lo[k] < 0 or hi[k] >= grid.shape[k]:
            return None
        ul, uh = u.values[tuple(lo)], u.values[tuple(hi)]
        q[k] = (uh - ul) / (2 * h)
        d2[k] = (uh - 2 * u.values[node] + ul) / h**2
    x = grid.origin + h * np.asarray(node, dtype=float)
    return OneSidedJet(float(u.values[node]), q, float(a), float(b), d2, _normal(grid), x)


def _hamiltonian(op: FirstOrderOperator, eta: float) -> Callable:
    return lambda p, z, x: eval_first_order(op, p, z, x) + eta


def _slope_grid(lo: float, hi: float) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(lo, hi, SLOPE_SAMPLES), [lo, hi]]))


def check_interface_strong(jet: OneSidedJet, h_minus: FirstOrderOperator, tol: float,
                           eta: float = 0.0) -> InterfaceCheck:
    """Interval test of the first-order equation holding up to the interface.

    Concave angle (``a >= b``): the sub inequality must hold for every normal
    slope in ``[b, a]``. Convex angle (``a <= b``): the super inequality must
    hold for every slope in ``[a, b]``. Near-equal slopes run both.
    """
    H = _hamiltonian(h_minus, eta)
    a, b = jet.a, jet.b
    sub_res = -np.inf
    sup_res = None
    if a >= b - tol:
        ps = _slope_grid(b, max(a, b))
        sub_res = max(H(jet.gradient(p), jet.z, jet.x) for p in ps)
    if a <= b + tol:
        ps = _slope_grid(min(a, b), b)
        sup_res = -min(H(jet.gradient(p), jet.z, jet.x) for p in ps)
    angle = "flat" if abs(a - b) <= tol else ("concave" if a > b else "convex")
    sub_res = float(sub_res) if np.isfinite(sub_res) else -np.inf
    cls = Classification.PASS
    res = sub_res
    if sub_res > tol:
        cls = Classification.SUB_VIOLATION
    if sup_res is not None:
        res = max(res, sup_res)
        if sup_res > tol and cls == Classification.PASS:
            cls = Classification.SUPER_VIOLATION
    return InterfaceCheck(cls, float(res), angle, sub_res, sup_res)


def check_transmission_relaxed(jet: OneSidedJet, h_minus: FirstOrderOperator, tol: float,
                               eta: float = 0.0) -> InterfaceCheck:
    """Sub test ``min(H(q, b), a - b) <= tol`` of the relaxed interface condition."""
    H = _hamiltonian(h_minus, eta)
    val = float(min(H(jet.gradient(jet.b), jet.z, jet.x), jet.a - jet.b))
    cls = Classification.SUB_VIOLATION if val > tol else Classification.PASS
    angle = "flat" if abs(jet.a - jet.b) <= tol else ("concave" if jet.a > jet.b else "convex")
    return InterfaceCheck(cls, val, angle, val, None)


@dataclass
class VerificationReport:
    """Per-node classification and residuals.

    ``residual`` holds the largest signed excess over all checks applied at
    a node, so a node passes exactly when its residual is at most
    ``tolerance``.
    """

    grid: Grid
    classification: np.ndarray
    residual: np.ndarray
    tolerance: float
    rule: InterfaceRule
    kinks: np.ndarray
    warnings: list[str] = field(default_factory=list)
    interface_agreement: bool | None = None
    interface_details: dict[tuple[int, ...], dict[str, Any]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.classification == Classification.PASS))

    @property
    def worst_violation(self) -> float:
        checked = np.isfinite(self.residual)
        return float(self.residual[checked].max()) if np.any(checked) else -np.inf

    @property
    def worst_location(self) -> tuple[int, ...] | None:
        if not np.any(np.isfinite(self.residual)):
            return None
        r = np.where(np.isfinite(self.residual), self.residual, -np.inf)
        return tuple(int(i) for i in np.unravel_index(int(np.argmax(r)), r.shape))

    def count(self, cls: Classification) -> int:
        return int(np.count_nonzero(self.classification == cls))

    def violations(self) -> list[dict[str, Any]]:
        out = []
        for idx in zip(*np.nonzero(self.classification != Classification.PASS)):
            idx = tuple(int(i) for i in idx)
            out.append({
                "node": list(idx),
                "x": [self.grid.origin[k] + self.grid.h * idx[k] for k in range(self.grid.dimension)],
                "tag": Region(int(self.grid.tags[idx])).name,
                "class": Classification(int(self.classification[idx])).name,
                "residual": float(self.residual[idx]),
            })
        return out

    def merge(self, other: VerificationReport) -> VerificationReport:
        """Combine two reports on the same grid, keeping the larger residual per node."""
        cls = np.where(other.classification != Classification.PASS, other.classification,
                       self.classification)
        res = np.fmax(self.residual, other.residual)
        return VerificationReport(self.grid, cls, res, max(self.tolerance, other.tolerance),
                                  self.rule, self.kinks | other.kinks,
                                  self.warnings + other.warnings,
                                  self.interface_agreement if other.interface_agreement is None
                                  else other.interface_agreement,
                                  {**self.interface_details, **other.interface_details})

    def summary(self) -> dict[str, Any]:
        loc = self.worst_location
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "rule": self.rule.value,
            "worst_violation": self.worst_violation,
            "worst_node": list(loc) if loc is not None else None,
            "sub_violations": self.count(Classification.SUB_VIOLATION),
            "super_violations": self.count(Classification.SUPER_VIOLATION),
            "kink_nodes": int(np.count_nonzero(self.kinks)),
            "interface_rules_agree": self.interface_agreement,
            "warnings": list(self.warnings),
        }

    def to_dict(self) -> dict[str, Any]:
        return {"summary": self.summary(), "violations": self.violations()}


def _empty_report(grid: Grid, tol: float, rule: InterfaceRule) -> VerificationReport:
    return VerificationReport(
        grid=grid,
        classification=np.zeros(grid.shape, dtype=np.int8),
        residual=np.full(grid.shape, np.nan),
        tolerance=float(tol),
        rule=InterfaceRule(rule),
        kinks=np.zeros(grid.shape, dtype=bool),
    )


def concave_kinks(u: GridFunction, curvature: float = KINK_CURVATURE) -> np.ndarray:
    """Nodes where some axis slope drops by more than ``4 h curvature`` across the node."""
    grid = u.grid
    h = grid.h
    out = np.zeros(grid.shape, dtype=bool)
    v = u.values
    for k in range(grid.dimension):
        lo = [slice(None)] * grid.dimension
        mid = [slice(None)] * grid.dimension
        hi = [slice(None)] * grid.dimension
        lo[k], mid[k], hi[k] = slice(None, -2), slice(1, -1), slice(2, None)
        back = (v[tuple(mid)] - v[tuple(lo)]) / h
        fwd = (v[tuple(hi)] - v[tuple(mid)]) / h
        out[tuple(mid)] |= (back - fwd) > 4 * h * curvature
    return out


def check_interior(u: GridFunction, problem: TransmissionProblem, tol: float,
                   curvature: float = KINK_CURVATURE) -> VerificationReport:
    """Scheme residuals at EIKONAL and BROWNIAN nodes.

    Eikonal residuals are divided by ``h`` so they approximate ``|Du| - c``;
    the super part is skipped at concave kinks, which test functions can only
    touch from above. Brownian residuals are the stencil value of the
    second-order operator. Only nodes whose stencil lies inside ``u.mask``
    are tested.
    """
    grid = problem.grid
    disc = problem.discretization()
    rep = _empty_report(grid, tol, InterfaceRule.RELAXED_MIN)
    v = u.values.ravel().astype(float)
    kinks = concave_kinks(u, curvature).ravel()
    tags = grid.tags.ravel()
    cls = rep.classification.ravel()
    res = rep.residual.ravel()
    mask = u.mask.ravel()
    nbr_ok = np.where(disc.nbr >= 0, mask[np.maximum(disc.nbr, 0)], True).all(axis=1)
    usable = mask & nbr_ok
    eik = np.flatnonzero((tags == Region.EIKONAL) & usable)
    if eik.size:
        upd = _kernels.jacobi_updates(v, eik, np.zeros(eik.size, dtype=np.int64), disc.nbr,
                                      disc.W, disc.C, disc.R, disc.h, disc.c, True)
        sub = (v[eik] - upd) / disc.h
        sup = np.where(kinks[eik], -np.inf, (upd - v[eik]) / disc.h)
        res[eik] = np.maximum(sub, sup)
        cls[eik] = np.where(sub > tol, Classification.SUB_VIOLATION,
                            np.where(sup > tol, Classification.SUPER_VIOLATION, Classification.PASS))
    br = np.flatnonzero((tags == Region.BROWNIAN) & usable)
    if br.size:
        stencil = disc.C[br] * v[br] - np.einsum("ij,ij->i", disc.W[br], v[disc.nbr[br]]) - disc.R[br]
        res[br] = np.abs(stencil)
        cls[br] = np.where(stencil > tol, Classification.SUB_VIOLATION,
                           np.where(stencil < -tol, Classification.SUPER_VIOLATION, Classification.PASS))
    rep.kinks = kinks.reshape(grid.shape) & (grid.tags == Region.EIKONAL)
    return rep


def check_interface(u: GridFunction, problem: TransmissionProblem, rule: InterfaceRule,
                    tol: float) -> VerificationReport:
    """Interface checks for ``rule`` plus the agreement of the two rules on the sub part.

    Under the relaxed rule the sub part is the relaxed transmission test and
    the super part is the interval test shared with the strong rule.
    """
    grid = problem.grid
    rule = InterfaceRule(rule)
    rep = _empty_report(grid, tol, rule)
    iface = list(zip(*np.nonzero(grid.tags == Region.INTERFACE)))
    if not iface:
        return rep
    if not _interface_supported(grid):
        rep.warnings.append("interface checks skipped: the interface is not a grid hyperplane")
        return rep
    agree = True
    for node in iface:
        node = tuple(int(i) for i in node)
        jet = jets_at_interface(u, node)
        if jet is None:
            rep.warnings.append(f"interface node {list(node)} skipped: incomplete stencil")
            continue
        strong = check_interface_strong(jet, problem.h_minus, tol, problem.eta)
        relaxed = check_transmission_relaxed(jet, problem.h_minus, tol, problem.eta)
        if (strong.sub_residual > tol) != (relaxed.sub_residual > tol):
            agree = False
        if rule == InterfaceRule.STRONG_EIKONAL:
            chosen = strong
        else:
            sup = strong.super_residual
            val = relaxed.sub_residual if sup is None else max(relaxed.sub_residual, sup)
            cls = relaxed.classification
            if cls == Classification.PASS and sup is not None and sup > tol:
                cls = Classification.SUPER_VIOLATION
            chosen = InterfaceCheck(cls, val, relaxed.angle, relaxed.sub_residual, sup)
        rep.classification[node] = chosen.classification
        rep.residual[node] = chosen.residual
        rep.interface_details[node] = {
            "a": jet.a, "b": jet.b, "q": jet.q.tolist(), "angle": chosen.angle,
            "strong_sub": strong.sub_residual, "strong_super": strong.super_residual,
            "relaxed_sub": relaxed.sub_residual,
        }
    rep.interface_agreement = agree
    return rep


def verify(u: GridFunction, problem: TransmissionProblem,
           rule: InterfaceRule = InterfaceRule.RELAXED_MIN, tol: float | None = None,
           curvature: float = KINK_CURVATURE) -> VerificationReport:
    """Full check: interior residuals and interface conditions; ``tol`` defaults to ``10 h``."""
    if tol is None:
        tol = 10 * problem.grid.h
    if u.grid.shape != problem.grid.shape:
        raise ConfigurationError("grid function and problem live on different grids")
    interior = check_interior(u, problem, tol, curvature)
    interface = check_interface(u, problem, rule, tol)
    rep = interior.merge(interface)
    rep.rule = InterfaceRule(rule)
    rep.tolerance = float(tol)
    return rep


@dataclass
class ComparisonReport:
    passed: bool
    worst_margin: float
    worst_node: tuple[int, ...] | None
    tolerance: float
    preconditions: dict[str, bool]

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "worst_node": list(self.worst_node) if self.worst_node is not None else None,
            "tolerance": self.tolerance,
            "preconditions": dict(self.preconditions),
        }


def _sub_only(rep: VerificationReport) -> bool:
    return rep.count(Classification.SUB_VIOLATION) == 0


def _super_only(rep: VerificationReport) -> bool:
    return rep.count(Classification.SUPER_VIOLATION) == 0


def check_comparison(u: GridFunction, v: GridFunction, problem: TransmissionProblem,
                     tol: float = 1e-8, check_tol: float | None = None,
                     check_preconditions: bool = True) -> ComparisonReport:
    """Ordering ``u <= v + tol`` for a sub-solution ``u`` of the gap problem and a super-solution ``v``.

    ``problem.eta`` is the gap used for ``u``; ``v`` is checked against the
    same problem with zero gap. Preconditions are reported but never block
    the ordering test.
    """
    grid = problem.grid
    active = grid.tags != Region.EXTERIOR
    margin = np.where(active, u.values - v.values, -np.inf)
    k = int(np.argmax(margin))
    worst = float(margin.ravel()[k])
    node = tuple(int(i) for i in np.unravel_index(k, grid.shape))
    pre: dict[str, bool] = {}
    bnd = grid.tags == Region.BOUNDARY
    pre["boundary_ordered"] = bool(np.all(u.values[bnd] <= v.values[bnd] + tol))
    if check_preconditions:
        ct = 10 * grid.h if check_tol is None else check_tol
        pre["u_subsolution"] = _sub_only(verify(u, problem, InterfaceRule.RELAXED_MIN, ct))
        pre["v_supersolution"] = _super_only(verify(v, problem.with_gap(0.0), InterfaceRule.RELAXED_MIN, ct))
    return ComparisonReport(worst <= tol, worst, node, float(tol), pre)
