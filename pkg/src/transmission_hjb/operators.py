"""
First- and second-order operators, Pucci extremal operators, support
functions of sub-level sets and the Hopf-Lax lower envelope.

Sign conventions. A first-order operator ``H(p, z, x)`` is written so that
``H <= 0`` is the sub-solution inequality, e.g. ``|p| - c``. A second-order
operator of the supported affine form is

    a * (-tr M) - b(x) . p + c0 * z - rhs(x),

so the model operator ``(1/2)(-Laplacian) - 1`` has ``a = 1/2``, ``rhs = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InfeasibleError, UsageError

ArrayLike = Sequence[float] | np.ndarray


class FirstOrderForm(str, Enum):
    EIKONAL = "eikonal"
    SHIFTED_EIKONAL = "shifted_eikonal"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FirstOrderOperator:
    """Evaluable first-order operator with structural metadata.

    Attributes
    ----------
    form : FirstOrderForm
        Analytic tag. EIKONAL is ``|p| - speed``; SHIFTED_EIKONAL is
        ``|p - center| - speed``; CUSTOM evaluates ``func(p, z, x)``.
    interior_point : optional
        A point with ``H < 0`` used to trace the sub-level set of a CUSTOM
        operator by ray bisection.
    radius_fn : optional
        ``radius_fn(level, zbound)`` bounding ``{H <= level}`` for CUSTOM forms.
    proper : bool
        Declares ``H(p, z + d, x) >= H(p, z, x)`` for ``d >= 0``.
    """

    form: FirstOrderForm = FirstOrderForm.EIKONAL
    speed: float = 1.0
    center: tuple[float, ...] | None = None
    func: Callable | None = None
    interior_point: tuple[float, ...] | None = None
    radius_fn: Callable[[float, float], float] | None = None
    proper: bool = True
    quasi_convex: bool = True

    def __post_init__(self):
        if self.form in (FirstOrderForm.EIKONAL, FirstOrderForm.SHIFTED_EIKONAL) and not self.speed > 0:
            raise ConfigurationError(f"speed must be positive, got {self.speed}")
        if self.form == FirstOrderForm.SHIFTED_EIKONAL and self.center is None:
            raise ConfigurationError("shifted eikonal operator needs a center")
        if self.form == FirstOrderForm.CUSTOM and self.func is None:
            raise ConfigurationError("custom operator needs an evaluation function")

    @classmethod
    def eikonal(cls, speed: float = 1.0) -> FirstOrderOperator:
        return cls(FirstOrderForm.EIKONAL, speed=float(speed))

    @classmethod
    def shifted_eikonal(cls, center: ArrayLike, speed: float = 1.0) -> FirstOrderOperator:
        return cls(FirstOrderForm.SHIFTED_EIKONAL, speed=float(speed),
                   center=tuple(float(c) for c in center))

    @classmethod
    def custom(cls, func: Callable, interior_point: ArrayLike,
               radius_fn: Callable[[float, float], float], proper: bool = True,
               quasi_convex: bool = True) -> FirstOrderOperator:
        return cls(FirstOrderForm.CUSTOM, func=func,
                   interior_point=tuple(float(c) for c in interior_point),
                   radius_fn=radius_fn, proper=proper, quasi_convex=quasi_convex)

    def __call__(self, p, z=0.0, x=None) -> float:
        return eval_first_order(self, p, z, x)

    def radius_bound(self, level: float = 0.0, zbound: float = 0.0) -> float:
        """Radius of a ball centred at 0 containing ``{p : H(p, z, x) <= level}``."""
        if self.form == FirstOrderForm.EIKONAL:
            return max(self.speed + level, 0.0)
        if self.form == FirstOrderForm.SHIFTED_EIKONAL:
            return float(np.linalg.norm(self.center)) + max(self.speed + level, 0.0)
        if self.radius_fn is None:
            raise ConfigurationError("custom operator has no sub-level radius bound")
        return float(self.radius_fn(level, zbound))

    @property
    def is_stencil_supported(self) -> bool:
        return self.form == FirstOrderForm.EIKONAL


def eval_first_order(op: FirstOrderOperator, p, z=0.0, x=None) -> float:
    """Evaluate ``H(p, z, x)``; ``p`` may be a scalar in one dimension."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if op.form == FirstOrderForm.EIKONAL:
        return float(np.linalg.norm(p)) - op.speed
    if op.form == FirstOrderForm.SHIFTED_EIKONAL:
        q = np.asarray(op.center, dtype=float)
        if q.shape != p.shape:
            raise UsageError(f"gradient has dimension {p.size}, center has {q.size}")
        return float(np.linalg.norm(p - q)) - op.speed
    return float(op.func(p, z, x))


@dataclass(frozen=True)
class SecondOrderOperator:
    """Affine uniformly elliptic operator ``a(-tr M) - b(x).p + c0 z - rhs(x)``.

    ``lam`` and ``Lam`` are the ellipticity constants; for the affine form they
    default to ``a``. A general ``F(M, p, z)`` may be supplied through
    ``custom_F`` (added to ``c0 z - rhs(x)``); such operators evaluate fine but
    are rejected by the stencil solver.
    """

    diffusion: float = 0.5
    rhs: float | Callable = 1.0
    drift: Callable | None = None
    zeroth: float = 0.0
    lam: float | None = None
    Lam: float | None = None
    custom_F: Callable | None = None

    def __post_init__(self):
        if self.custom_F is None and not self.diffusion > 0:
            raise ConfigurationError(f"diffusion must be positive, got {self.diffusion}")
        if self.zeroth < 0:
            raise ConfigurationError("zeroth-order coefficient must be >= 0 (properness)")
        lam = self.diffusion if self.lam is None else self.lam
        Lam = self.diffusion if self.Lam is None else self.Lam
        if not 0 < lam <= Lam:
            raise ConfigurationError(f"need 0 < lambda <= Lambda, got {lam}, {Lam}")
        object.__setattr__(self, "lam", float(lam))
        object.__setattr__(self, "Lam", float(Lam))

    @classmethod
    def half_neg_laplacian(cls, rhs: float | Callable = 1.0) -> SecondOrderOperator:
        return cls(diffusion=0.5, rhs=rhs)

    @property
    def is_stencil_supported(self) -> bool:
        return self.custom_F is None

    def rhs_at(self, x) -> float:
        return float(self.rhs(np.asarray(x, dtype=float))) if callable(self.rhs) else float(self.rhs)

    def drift_at(self, x, n: int) -> np.ndarray:
        if self.drift is None:
            return np.zeros(n)
        return np.atleast_1d(np.asarray(self.drift(np.asarray(x, dtype=float)), dtype=float))

    def F(self, M, p, z=0.0) -> float:
        """Translation-invariant part (no position dependence)."""
        M = _as_symmetric(M)
        if self.custom_F is not None:
            return float(self.custom_F(M, np.atleast_1d(p), z))
        return -self.diffusion * float(np.trace(M))

    def f(self, z, x) -> float:
        """Positional part; increasing in ``z`` because ``zeroth >= 0``."""
        return self.zeroth * float(z) - self.rhs_at(x)


def eval_second_order(op: SecondOrderOperator, M, p, z=0.0, x=None) -> float:
    """``F(M, p, z) + f(z, x)``, including the drift term ``-b(x).p``."""
    M = _as_symmetric(M)
    n = M.shape[0]
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if x is None:
        x = np.zeros(n)
    drift = op.drift_at(x, n) if op.drift is not None else np.zeros(n)
    return op.F(M, p, z) - float(drift @ p) + op.f(z, x)


def _as_symmetric(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    return M


def _check_ellipticity(lam: float, Lam: float) -> None:
    if not 0 < lam <= Lam:
        raise ValueError(f"need 0 < lambda <= Lambda, got {lam}, {Lam}")


def pucci_plus(M, lam: float, Lam: float) -> float:
    """Maximal Pucci operator ``sup_A -tr(A M)`` over ``lam I <= A <= Lam I``."""
    _check_ellipticity(lam, Lam)
    e = np.linalg.eigvalsh(_as_symmetric(M))
    return float(-np.sum(lam * np.clip(e, 0, None) + Lam * np.clip(e, None, 0)))


def pucci_minus(M, lam: float, Lam: float) -> float:
    """Minimal Pucci operator ``inf_A -tr(A M)`` over ``lam I <= A <= Lam I``."""
    _check_ellipticity(lam, Lam)
    e = np.linalg.eigvalsh(_as_symmetric(M))
    return float(-np.sum(Lam * np.clip(e, 0, None) + lam * np.clip(e, None, 0)))


@dataclass
class SupportFunction:
    """Support function of ``{p : H(p) + gap <= 0}``.

    ``sign = +1`` gives the maximum of ``p.x`` over the set, ``sign = -1`` the
    minimum. Both are positively one-homogeneous in ``x``.
    """

    sign: int
    op: FirstOrderOperator
    gap: float = 0.0
    _clouds: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ConfigurationError(f"sign must be +1 or -1, got {self.sign}")
        if self.gap < 0:
            raise ConfigurationError(f"gap must be >= 0, got {self.gap}")

    def __call__(self, x) -> float | np.ndarray:
        return support_value(self, x)

    def boundary_cloud(self, dim: int) -> np.ndarray:
        """Boundary points of the sub-level set found by ray bisection."""
        if dim not in self._clouds:
            self._clouds[dim] = _trace_sublevel(self.op, self.gap, dim)
        return self._clouds[dim]


RAY_TOL = 1e-9
RAYS_2D = 720


def _trace_sublevel(op: FirstOrderOperator, gap: float, dim: int) -> np.ndarray:
    if op.interior_point is None:
        raise ConfigurationError("custom operator needs an interior point")
    p0 = np.asarray(op.interior_point, dtype=float)
    if p0.size != dim:
        raise UsageError(f"interior point has dimension {p0.size}, expected {dim}")
    if eval_first_order(op, p0) + gap > 0:
        raise InfeasibleError("interior point is outside the sub-level set; set may be empty")
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif dim == 2:
        th = np.linspace(0, 2 * np.pi, RAYS_2D, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        raise UsageError("ray tracing is implemented for dimensions 1 and 2")
    reach = op.radius_bound(-gap) + float(np.linalg.norm(p0)) + 1.0
    pts = np.empty((len(dirs), dim))
    for k, d in enumerate(dirs):
        lo, hi = 0.0, reach
        while hi - lo > RAY_TOL:
            mid = 0.5 * (lo + hi)
            if eval_first_order(op, p0 + mid * d) + gap <= 0:
                lo = mid
            else:
                hi = mid
        pts[k] = p0 + lo * d
    return pts


def support_value(sf: SupportFunction, x) -> float | np.ndarray:
    """Evaluate the support function at one point or at a stack ``(k, n)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = x.reshape(1, -1) if single else x
    op = sf.op
    if op.form in (FirstOrderForm.EIKONAL, FirstOrderForm.SHIFTED_EIKONAL):
        radius = op.speed - sf.gap
        if radius < 0:
            raise InfeasibleError(f"sub-level set is empty: gap {sf.gap} exceeds speed {op.speed}")
        out = sf.sign * radius * np.linalg.norm(X, axis=1)
        if op.form == FirstOrderForm.SHIFTED_EIKONAL:
            q = np.asarray(op.center, dtype=float)
            if q.size != X.shape[1]:
                raise UsageError(f"point has dimension {X.shape[1]}, center has {q.size}")
            out = out + X @ q
    else:
        cloud = sf.boundary_cloud(X.shape[1])
        proj = X @ cloud.T
        out = proj.max(axis=1) if sf.sign == 1 else proj.min(axis=1)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class HopfLaxResult:
    value: float
    argmin: np.ndarray
    at_window_edge: bool
    spacing: float
    window: float


def hopf_lax(boundary_data: Callable, sf: SupportFunction, x,
             spacing: float | None = None, window: float | None = None,
             data_support_radius: float = 0.0) -> HopfLaxResult:
    """Discrete ``inf_{y'} data(y') + phi(x - (y', 0))`` over a window on the interface.

    Parameters
    ----------
    boundary_data : callable
        Maps an array of tangential points of shape ``(k, n-1)`` to ``(k,)``.
    sf : SupportFunction
        Usually the ``+`` support function of the eikonal-side operator.
    x : array_like
        Query point with last coordinate ``<= 0``.
    spacing, window : float, optional
        Sample spacing and half-width of the tangential window. The window
        defaults to the cone of dependence ``R |x_n| + data_support_radius``.

    Returns
    -------
    HopfLaxResult
        ``at_window_edge`` is set when no interior sample attains the minimum.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x[-1] > 0:
        raise UsageError("the Hopf-Lax envelope is evaluated on the side x_n <= 0")
    n = x.size
    if n == 1:
        y = np.zeros((1, 0))
        vals = np.asarray(boundary_data(y), dtype=float).reshape(-1) + support_value(sf, x)
        return HopfLaxResult(float(vals[0]), y[0], False, 0.0, 0.0)
    if n != 2:
        raise UsageError("hopf_lax supports dimensions 1 and 2")
    if window is None:
        window = sf.op.radius_bound(-sf.gap) * abs(x[-1]) + data_support_radius
    if spacing is None:
        spacing = max(window, 1e-3) / 200
    m = max(int(math.ceil(window / spacing)), 0)
    ys = x[0] + spacing * np.arange(-m, m + 1)
    Y = ys.reshape(-1, 1)
    disp = np.column_stack([x[0] - ys, np.full(ys.size, x[-1])])
    vals = np.asarray(boundary_data(Y), dtype=float).reshape(-1) + support_value(sf, disp)
    k = int(np.argmin(vals))
    best = vals[k]
    inner = vals[1:-1]
    edge = ys.size > 2 and (inner.size == 0 or inner.min() > best + 1e-12 * max(1.0, abs(best)))
    return HopfLaxResult(float(best), Y[k], bool(edge), float(spacing), float(window))
