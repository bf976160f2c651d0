"""
Tangential sup- and inf-convolutions on grids.

The quadratic penalty acts only along the directions parallel to the flat
interface (all coordinates but the last); each row ``x_n = const`` is
regularized independently. On a one-dimensional grid the line itself is the
tangential direction.

The search window has radius ``r = 2 sqrt(M eps)`` with ``M = ||u||_inf``;
beyond it the penalty exceeds ``2M`` so no maximizer can lie there. The
output is defined on the shrunk set of nodes whose tangential ``r``-window
stays in the domain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import GridFunction, Region


@dataclass(frozen=True)
class ConvolutionParams:
    eps: float
    sup_norm: float
    radius: float
    axes: tuple[int, ...]


def tangential_axes(dimension: int) -> tuple[int, ...]:
    return (0,) if dimension == 1 else tuple(range(dimension - 1))


def convolution_params(u: GridFunction, eps: float) -> ConvolutionParams:
    if not 0 < eps < 1:
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    M = float(np.abs(u.values[u.mask]).max(initial=0.0))
    return ConvolutionParams(float(eps), M, 2.0 * math.sqrt(M * eps), tangential_axes(u.grid.dimension))


def _offsets(radius: float, h: float, axes: tuple[int, ...], dim: int):
    m = int(math.floor(radius / h + 1e-9))
    out = []
    for ks in itertools.product(range(-m, m + 1), repeat=len(axes)):
        d2 = sum(k * k for k in ks) * h * h
        if d2 <= radius * radius * (1 + 1e-12):
            off = [0] * dim
            for ax, k in zip(axes, ks):
                off[ax] = k
            out.append((tuple(off), d2))
    return out


def _shift(a: np.ndarray, off: tuple[int, ...], fill) -> np.ndarray:
    """``out[i] = a[i + off]`` with ``fill`` where the index leaves the array."""
    out = np.full_like(a, fill)
    src, dst = [], []
    for k, n in zip(off, a.shape):
        if k >= 0:
            src.append(slice(k, n))
            dst.append(slice(0, n - k))
        else:
            src.append(slice(0, n + k))
            dst.append(slice(-k, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


def shrunk_domain(u: GridFunction, radius: float) -> np.ndarray:
    """Nodes whose tangential ``radius``-window stays inside the domain.

    Only tangential offsets are tested because the convolution never looks
    across rows.
    """
    grid = u.grid
    inside = (grid.tags != Region.EXTERIOR) & u.mask
    out = inside.copy()
    for off, _ in _offsets(radius, grid.h, tangential_axes(grid.dimension), grid.dimension):
        out &= _shift(inside, off, False)
    return out


def sup_convolution(u: GridFunction, eps: float) -> GridFunction:
    """``max`` over the tangential window of ``u(y', x_n) - |y' - x'|^2 / (2 eps)``."""
    p = convolution_params(u, eps)
    h = u.grid.h
    if p.radius < h:
        raise ConfigurationError(
            f"search radius 2*sqrt(M*eps) = {p.radius:.3g} is below h = {h}; the window "
            "must contain at least three nodes per tangential axis")
    dom = shrunk_domain(u, p.radius)
    if not np.any(dom):
        raise ConfigurationError("the shrunk domain is empty; decrease eps or refine the grid")
    vals = np.where(u.mask, u.values, -np.inf)
    best = np.full(u.grid.shape, -np.inf)
    for off, d2 in _offsets(p.radius, h, p.axes, u.grid.dimension):
        np.maximum(best, _shift(vals, off, -np.inf) - d2 / (2 * eps), out=best)
    out = np.where(dom, best, 0.0)
    return GridFunction(u.grid, out, dom, u.units)


def inf_convolution(u: GridFunction, eps: float) -> GridFunction:
    """``min`` over the tangential window of ``u(y', x_n) + |y' - x'|^2 / (2 eps)``."""
    neg = GridFunction(u.grid, -u.values, u.mask.copy(), u.units)
    s = sup_convolution(neg, eps)
    return GridFunction(u.grid, -s.values, s.mask, u.units)


def semiconvexity_defect(w: GridFunction, eps: float) -> float:
    """Smallest tangential second difference of ``w + |x'|^2 / (2 eps)``.

    Differences are raw (not divided by ``h^2``) and taken only where the
    three-point stencil lies in ``w.mask``.
    """
    grid = w.grid
    axes = tangential_axes(grid.dimension)
    x = grid.coords()
    quad = sum(x[..., k] ** 2 for k in axes) / (2 * eps)
    f = np.where(w.mask, w.values + quad, np.nan)
    worst = np.inf
    for k in axes:
        n = grid.shape[k]
        if n < 3:
            continue
        lo = np.take(f, range(0, n - 2), axis=k)
        mid = np.take(f, range(1, n - 1), axis=k)
        hi = np.take(f, range(2, n), axis=k)
        d2 = hi - 2 * mid + lo
        if np.any(np.isfinite(d2)):
            worst = min(worst, float(np.nanmin(d2)))
    return worst
