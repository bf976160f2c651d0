"""
Exact solutions used as oracles.

* The one-dimensional family on ``(-1, 1)`` with the eikonal side on
  ``(-1, 0)``, the Poisson side ``(1/2)(-u'') = 0`` on ``(0, 1)``, ``u(-1) = 0``
  and ``u(1) = alpha``. The solution is a tent ``1 + beta - |x - beta|`` on the
  left glued to a straight line on the right.
* The radial solution on an annulus ``B_R \\ B_r`` whose outer ring
  ``|x| > rho`` is eikonal (``u = R - |x|``) and whose inner ring solves
  ``(1/2)(-Laplacian) u = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError


@dataclass(frozen=True)
class ClosedForm1D:
    """Solution of the one-dimensional family; ``beta`` is the kink location."""

    alpha: float
    beta: float
    exists: bool = True

    @property
    def interface_value(self) -> float:
        return 1.0 + 2.0 * self.beta

    @property
    def right_slope(self) -> float:
        """Slope of the linear branch on ``[0, 1]``."""
        return self.alpha - 1.0 - 2.0 * self.beta


@dataclass(frozen=True)
class NoSolution:
    """Typed outcome for boundary data admitting no solution."""

    alpha: float
    reason: str = "right boundary value below -2"
    exists: bool = False


def solve_1d_family(alpha: float) -> ClosedForm1D | NoSolution:
    alpha = float(alpha)
    if alpha >= 0:
        return ClosedForm1D(alpha, 0.0)
    if alpha >= -2:
        return ClosedForm1D(alpha, alpha / 2)
    return NoSolution(alpha)


def candidate_1d(alpha: float, beta: float, x) -> np.ndarray | float:
    """Tent-plus-line function for an arbitrary kink ``beta``.

    It matches both boundary values and is continuous at 0, but it is a
    solution only for the ``beta`` returned by :func:`solve_1d_family`.
    """
    x = np.asarray(x, dtype=float)
    left = 1.0 + beta - np.abs(x - beta)
    right = alpha * x + (1.0 + 2.0 * beta) * (1.0 - x)
    out = np.where(x <= 0, left, right)
    return float(out) if out.ndim == 0 else out


def eval_1d(sol: ClosedForm1D | NoSolution, x) -> np.ndarray | float:
    if not isinstance(sol, ClosedForm1D) or not sol.exists:
        raise UsageError(f"no solution exists for alpha = {sol.alpha}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -1 - 1e-12) or np.any(xa > 1 + 1e-12):
        raise UsageError("x must lie in [-1, 1]")
    return candidate_1d(sol.alpha, sol.beta, xa)


def phi(s, n: int):
    """Radial fundamental-solution profile: ``-ln s`` in 2D, ``s^(2-n)`` above."""
    s = np.asarray(s, dtype=float)
    return -np.log(s) if n == 2 else s ** (2 - n)


def dphi(s, n: int):
    s = np.asarray(s, dtype=float)
    return -1.0 / s if n == 2 else (2 - n) * s ** (1 - n)


@dataclass(frozen=True)
class AnnulusSolution:
    """Radial annulus solution and the quantities of its defining system.

    ``slope`` is the radial derivative of the inner branch at ``rho``; the
    feasibility condition is ``slope <= 1``. ``slope_ge_minus_one`` is reported
    for information only.
    """

    n: int
    r: float
    R: float
    rho: float
    A: float
    B: float
    slope: float
    slope_ge_minus_one: bool
    residuals: tuple[float, float, float]


@dataclass(frozen=True)
class Infeasible:
    n: int
    r: float
    R: float
    rho: float
    slope: float
    reason: str = "slope of the inner branch at rho exceeds 1"


def _check_radii(n: int, r: float, R: float, rho: float) -> None:
    if int(n) != n or n < 2:
        raise ConfigurationError(f"dimension must be an integer >= 2, got {n}")
    if not 0 < r < rho < R:
        raise ConfigurationError(f"need 0 < r < rho < R, got r={r}, rho={rho}, R={R}")


def _constants(n: int, r: float, R: float, rho: float) -> tuple[float, float]:
    mat = np.array([[1.0, phi(r, n)], [1.0, phi(rho, n)]])
    rhs = np.array([r * r / n, R - rho + rho * rho / n])
    A, B = np.linalg.solve(mat, rhs)
    return float(A), float(B)


def inner_slope(n: int, r: float, R: float, rho: float) -> float:
    _, B = _constants(n, r, R, rho)
    return float(B * dphi(rho, n) - 2 * rho / n)


def solve_annulus(n: int, r: float, R: float, rho: float,
                  slack: float = 1e-12) -> AnnulusSolution | Infeasible:
    """Constants ``A, B`` for a caller-chosen interface radius ``rho``.

    Returns :class:`Infeasible` when the slope inequality fails by more than
    ``slack``.
    """
    _check_radii(n, r, R, rho)
    A, B = _constants(n, r, R, rho)
    slope = float(B * dphi(rho, n) - 2 * rho / n)
    if slope > 1 + slack:
        return Infeasible(n, r, R, rho, slope)
    scale0 = max(1.0, abs(A), abs(B * phi(r, n)), r * r / n)
    scale1 = max(1.0, abs(A), abs(B * phi(rho, n)), R)
    res = (
        abs(A + B * phi(r, n) - r * r / n) / scale0,
        abs(A + B * phi(rho, n) - rho * rho / n - (R - rho)) / scale1,
        max(slope - 1.0, 0.0),
    )
    return AnnulusSolution(n, float(r), float(R), float(rho), A, B, slope,
                           slope >= -1.0, tuple(float(v) for v in res))


def canonical_rho(n: int, r: float, R: float, xtol: float = 1e-10) -> float:
    """Interface radius where the slope inequality binds, found by bisection.

    The inner slope decreases in ``rho``; the returned value is the feasible
    end of the final bracket.
    """
    lo, hi = r + 1e-12 * (R - r), R - 1e-12 * (R - r)
    f_lo = inner_slope(n, r, R, lo) - 1
    f_hi = inner_slope(n, r, R, hi) - 1
    if f_hi > 0:
        raise ConfigurationError("no feasible interface radius in (r, R)")
    if f_lo <= 0:
        return lo
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if inner_slope(n, r, R, mid) - 1 > 0:
            lo = mid
        else:
            hi = mid
    return hi


def eval_annulus(sol: AnnulusSolution, s) -> np.ndarray | float:
    """Radial profile at radius ``s`` in ``[r, R]``."""
    if not isinstance(sol, AnnulusSolution):
        raise UsageError("cannot evaluate an infeasible annulus configuration")
    sa = np.asarray(s, dtype=float)
    tol = 1e-12 * max(1.0, sol.R)
    if np.any(sa < sol.r - tol) or np.any(sa > sol.R + tol):
        raise UsageError(f"radius must lie in [{sol.r}, {sol.R}]")
    sc = np.clip(sa, sol.r, sol.R)
    inner = sol.A + sol.B * phi(sc, sol.n) - sc * sc / sol.n
    out = np.where(sc >= sol.rho, sol.R - sc, inner)
    return float(out) if out.ndim == 0 else out


def annulus_gradient_radial(sol: AnnulusSolution, s) -> np.ndarray | float:
    """Radial derivative, using the outer branch at ``s = rho``."""
    sa = np.asarray(s, dtype=float)
    out = np.where(sa >= sol.rho, -1.0, sol.B * dphi(sa, sol.n) - 2 * sa / sol.n)
    return float(out) if out.ndim == 0 else out


def distance_to_square_boundary(x, half_width: float = 1.0) -> np.ndarray:
    """Distance to the boundary of ``[-L, L]^n``: ``L - max |x_i|``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return half_width - np.abs(x).max(axis=-1)


__all__ = [
    "ClosedForm1D", "NoSolution", "solve_1d_family", "candidate_1d", "eval_1d",
    "AnnulusSolution", "Infeasible", "solve_annulus", "canonical_rho", "eval_annulus",
    "inner_slope", "phi", "dphi", "annulus_gradient_radial", "distance_to_square_boundary",
]
