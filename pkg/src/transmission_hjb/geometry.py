"""
Uniform grids with a region label per node.

Two families are supported:

* interval / slab grids, where the interface is the flat hyperplane
  ``{x_n = level}`` and lies exactly on a grid row;
* annulus grids ``B_R \\ B_r`` embedded in a square box, with the circle
  ``|x| = rho`` approximated by the innermost layer of eikonal nodes.

The "radial" kind is an interval in the radius variable used for the radial
reduction of the annulus problem.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any

import numpy as np

from .errors import ConfigurationError

_RATIO_TOL = 1e-9


class Region(IntEnum):
    EIKONAL = 0
    BROWNIAN = 1
    INTERFACE = 2
    BOUNDARY = 3
    EXTERIOR = 4


@dataclass(frozen=True)
class Box:
    x1min: float
    x1max: float
    x2min: float
    x2max: float


@dataclass(frozen=True)
class Annulus:
    r: float
    R: float
    half_width: float | None = None


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable uniform grid.

    Node ``index`` sits at ``origin + h * index``. ``tags`` holds one
    :class:`Region` code per node. The interface normal points into the
    Brownian side: along ``+e_n`` when ``normal_sign == 1`` and along ``-e_n``
    when ``normal_sign == -1``.
    """

    h: float
    origin: tuple[float, ...]
    tags: np.ndarray
    kind: str = "interval"
    normal_sign: int = 1
    interface_level: float | None = 0.0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        tags = np.array(self.tags, dtype=np.int8)
        tags.setflags(write=False)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if not self.h > 0:
            raise ConfigurationError(f"grid spacing must be positive, got h={self.h}")
        if tags.ndim != len(self.origin):
            raise ConfigurationError("tags rank does not match the origin dimension")
        if tags.size and (tags.min() < 0 or tags.max() > Region.EXTERIOR):
            raise ConfigurationError("unknown region code in tags")

    @property
    def dimension(self) -> int:
        return len(self.origin)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tags.shape

    @property
    def size(self) -> int:
        return self.tags.size

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.h * np.arange(self.shape[k])

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dimension)``."""
        axes = [self.axis(k) for k in range(self.dimension)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def flat_coords(self) -> np.ndarray:
        return self.coords().reshape(-1, self.dimension)

    def mask(self, *regions: Region) -> np.ndarray:
        return np.isin(self.tags, [int(r) for r in regions])

    def counts(self) -> dict[Region, int]:
        return {reg: int(np.count_nonzero(self.tags == reg)) for reg in Region}

    def neighbor_table(self) -> np.ndarray:
        """Flat neighbor indices, shape ``(size, 2n)``; ``-1`` when off the array.

        Columns are ordered ``(axis0 -, axis0 +, axis1 -, axis1 +, ...)``.
        """
        n = self.dimension
        idx = np.arange(self.size).reshape(self.shape)
        table = -np.ones((self.size, 2 * n), dtype=np.int64)
        for k in range(n):
            lo = np.full(self.shape, -1, dtype=np.int64)
            hi = np.full(self.shape, -1, dtype=np.int64)
            src = [slice(None)] * n
            dst = [slice(None)] * n
            src[k], dst[k] = slice(None, -1), slice(1, None)
            lo[tuple(dst)] = idx[tuple(src)]
            hi[tuple(src)] = idx[tuple(dst)]
            table[:, 2 * k] = lo.ravel()
            table[:, 2 * k + 1] = hi.ravel()
        return table

    def neighbors(self, index: tuple[int, ...]) -> list[tuple[int, ...] | None]:
        """Axis neighbors of a node in the same column order as :meth:`neighbor_table`."""
        out: list[tuple[int, ...] | None] = []
        for k in range(self.dimension):
            for step in (-1, 1):
                nb = list(index)
                nb[k] += step
                out.append(tuple(nb) if 0 <= nb[k] < self.shape[k] else None)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "h": self.h,
            "origin": list(self.origin),
            "shape": list(self.shape),
            "tags": base64.b64encode(self.tags.astype(np.int8).tobytes(order="C")).decode("ascii"),
            "kind": self.kind,
            "normal_sign": self.normal_sign,
            "interface_level": self.interface_level,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Grid:
        raw = base64.b64decode(data["tags"])
        tags = np.frombuffer(raw, dtype=np.int8).reshape(data["shape"])
        if len(data["origin"]) != data["dimension"]:
            raise ConfigurationError("origin length does not match dimension")
        return cls(
            h=float(data["h"]),
            origin=tuple(data["origin"]),
            tags=tags.copy(),
            kind=data.get("kind", "interval"),
            normal_sign=int(data.get("normal_sign", 1)),
            interface_level=data.get("interface_level"),
            params=dict(data.get("params", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> Grid:
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_nodes(cls, points: np.ndarray, tags: np.ndarray) -> Grid:
        """Rebuild a grid from a list of node coordinates and tags (e.g. a CSV).

        Nodes absent from the list are tagged EXTERIOR.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] == 1 and points.shape[1] > 1 and len(tags) > 1:
            points = points.T
        n = points.shape[1]
        spacing = []
        for k in range(n):
            d = np.diff(np.unique(points[:, k]))
            if d.size:
                spacing.append(d.min())
        if not spacing:
            raise ConfigurationError("cannot infer the spacing from a single node")
        h = float(min(spacing))
        origin = points.min(axis=0)
        ids = np.rint((points - origin) / h).astype(int)
        if np.abs(origin + ids * h - points).max() > 1e-6 * max(1.0, h):
            raise ConfigurationError("points are not on a uniform grid")
        shape = tuple(int(m) + 1 for m in ids.max(axis=0))
        full = np.full(shape, int(Region.EXTERIOR), dtype=np.int8)
        full[tuple(ids.T)] = np.asarray(tags, dtype=np.int8)
        level = None
        sign = 1
        iface = points[np.asarray(tags) == Region.INTERFACE]
        if iface.size and np.ptp(iface[:, -1]) < 1e-9:
            level = float(iface[0, -1])
            brown = points[np.asarray(tags) == Region.BROWNIAN]
            if brown.size and np.mean(brown[:, -1]) < level:
                sign = -1
        kind = "interval" if n == 1 else ("slab" if level is not None else "imported")
        return cls(h=h, origin=tuple(origin), tags=full, kind=kind, normal_sign=sign,
                   interface_level=level)

    def reflect_normal(self) -> Grid:
        """Mirror a slab grid across its interface, swapping the two regions."""
        if self.interface_level is None:
            raise ConfigurationError("reflection needs a flat interface")
        tags = np.flip(self.tags, axis=-1).copy()
        eik, brown = tags == Region.EIKONAL, tags == Region.BROWNIAN
        tags[eik], tags[brown] = Region.BROWNIAN, Region.EIKONAL
        top = self.origin[-1] + self.h * (self.shape[-1] - 1)
        origin = list(self.origin)
        origin[-1] = 2 * self.interface_level - top
        return Grid(h=self.h, origin=tuple(origin), tags=tags, kind=self.kind,
                    normal_sign=self.normal_sign, interface_level=self.interface_level,
                    params=dict(self.params))


@dataclass
class GridFunction:
    """Node values on a grid.

    ``mask`` marks the nodes where the function is defined; by default every
    non-EXTERIOR node. Values are expected times for value functions.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None
    units: str = "time"

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if self.mask is None:
            self.mask = self.grid.tags != Region.EXTERIOR
        else:
            self.mask = np.asarray(self.mask, dtype=bool).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("grid function has non-finite values on active nodes")

    def copy(self) -> GridFunction:
        return GridFunction(self.grid, self.values.copy(), self.mask.copy(), self.units)

    def sup_norm(self) -> float:
        return float(np.abs(self.values[self.mask]).max())


def _ratio(length: float, h: float, what: str) -> int:
    q = length / h
    k = int(round(q))
    if abs(q - k) > _RATIO_TOL * max(1.0, abs(q)):
        raise ConfigurationError(f"{what} = {q!r} is not an integer multiple of h")
    return k


def build_grid_1d(a: float, b: float, interface_pos: float, h: float,
                  brownian_side: str = "right", kind: str = "interval") -> Grid:
    """Interval ``[a, b]`` with the interface node at ``interface_pos``.

    Parameters
    ----------
    brownian_side : {"right", "left"}
        Which side of the interface carries the second-order operator.
    kind : str
        Stored as ``Grid.kind``; ``"radial"`` marks the radial annulus reduction.
    """
    if not h > 0:
        raise ConfigurationError(f"grid spacing must be positive, got h={h}")
    if not a < interface_pos < b:
        raise ConfigurationError(f"need a < interface < b, got {a}, {interface_pos}, {b}")
    if brownian_side not in ("right", "left"):
        raise ConfigurationError(f"brownian_side must be 'right' or 'left', got {brownian_side!r}")
    left = _ratio(interface_pos - a, h, "(interface_pos - a)/h")
    right = _ratio(b - interface_pos, h, "(b - interface_pos)/h")
    if left < 2 or right < 2:
        raise ConfigurationError(
            f"fewer than 2 interior nodes per side: (interface_pos - a)/h = {left}, "
            f"(b - interface_pos)/h = {right}; both must be >= 2")
    n = left + right + 1
    side_left = Region.BROWNIAN if brownian_side == "left" else Region.EIKONAL
    side_right = Region.EIKONAL if brownian_side == "left" else Region.BROWNIAN
    tags = np.empty(n, dtype=np.int8)
    tags[:left] = side_left
    tags[left + 1:] = side_right
    tags[left] = Region.INTERFACE
    tags[0] = tags[-1] = Region.BOUNDARY
    return Grid(h=float(h), origin=(float(a),), tags=tags, kind=kind,
                normal_sign=1 if brownian_side == "right" else -1,
                interface_level=float(interface_pos),
                params={"a": float(a), "b": float(b), "interface": float(interface_pos)})


def build_grid_2d(domain: Box | Annulus, interface: float, h: float,
                  brownian_side: str = "upper") -> Grid:
    """Slab (``Box``) or annulus grid.

    For a box the interface is the row ``x2 = interface``; the Brownian
    side is ``x2 > interface`` unless ``brownian_side == "lower"``. For
    an annulus ``interface`` is the radius rho and the Brownian side is
    the inner ring ``r < |x| < rho``.
    """
    if not h > 0:
        raise ConfigurationError(f"grid spacing must be positive, got h={h}")
    if isinstance(domain, Box):
        return _slab(domain, float(interface), float(h), brownian_side)
    if isinstance(domain, Annulus):
        return _annulus(domain, float(interface), float(h))
    raise ConfigurationError(f"unsupported domain {domain!r}")


def _slab(box: Box, level: float, h: float, brownian_side: str) -> Grid:
    if brownian_side not in ("upper", "lower"):
        raise ConfigurationError(f"brownian_side must be 'upper' or 'lower', got {brownian_side!r}")
    if not (box.x1min < box.x1max and box.x2min < level < box.x2max):
        raise ConfigurationError("interface row must lie strictly inside the box")
    n1 = _ratio(box.x1max - box.x1min, h, "(x1max - x1min)/h")
    below = _ratio(level - box.x2min, h, "(interface - x2min)/h")
    above = _ratio(box.x2max - level, h, "(x2max - interface)/h")
    if n1 < 2 or below < 2 or above < 2:
        raise ConfigurationError(
            f"too coarse: (x1max-x1min)/h = {n1}, (interface-x2min)/h = {below}, "
            f"(x2max-interface)/h = {above}; need >= 2 each")
    lower_tag = Region.BROWNIAN if brownian_side == "lower" else Region.EIKONAL
    upper_tag = Region.EIKONAL if brownian_side == "lower" else Region.BROWNIAN
    tags = np.empty((n1 + 1, below + above + 1), dtype=np.int8)
    tags[:, :below] = lower_tag
    tags[:, below + 1:] = upper_tag
    tags[:, below] = Region.INTERFACE
    tags[0, :] = tags[-1, :] = Region.BOUNDARY
    tags[:, 0] = tags[:, -1] = Region.BOUNDARY
    return Grid(h=h, origin=(box.x1min, box.x2min), tags=tags, kind="slab",
                normal_sign=1 if brownian_side == "upper" else -1,
                interface_level=level,
                params={"box": [box.x1min, box.x1max, box.x2min, box.x2max], "interface": level})


def _annulus(ann: Annulus, rho: float, h: float) -> Grid:
    r, R = float(ann.r), float(ann.R)
    if not 0 < r < rho < R:
        raise ConfigurationError(f"need 0 < r < rho < R, got r={r}, rho={rho}, R={R}")
    if h > R - r:
        raise ConfigurationError(f"h = {h} exceeds the ring width R - r = {R - r}: empty interior")
    L = float(ann.half_width if ann.half_width is not None else R)
    if L < R:
        raise ConfigurationError("the embedding box must contain the outer circle")
    m = _ratio(2 * L, h, "2*half_width/h")
    axis = -L + h * np.arange(m + 1)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    rad = np.hypot(X, Y)
    eps = 1e-12 * max(1.0, R)
    band = (rad >= r - eps) & (rad <= R + eps)
    tags = np.full(rad.shape, int(Region.EXTERIOR), dtype=np.int8)

    def shifted(a, k, step, fill):
        out = np.full_like(a, fill)
        if step == 1:
            sl_dst = (slice(None, -1), slice(None)) if k == 0 else (slice(None), slice(None, -1))
            sl_src = (slice(1, None), slice(None)) if k == 0 else (slice(None), slice(1, None))
        else:
            sl_dst = (slice(1, None), slice(None)) if k == 0 else (slice(None), slice(1, None))
            sl_src = (slice(None, -1), slice(None)) if k == 0 else (slice(None), slice(None, -1))
        out[sl_dst] = a[sl_src]
        return out

    touches_outside = np.zeros_like(band)
    for k in (0, 1):
        for step in (-1, 1):
            touches_outside |= ~shifted(band, k, step, False)
    boundary = band & touches_outside
    inner = band & ~boundary
    brown = inner & (rad < rho)
    outer = inner & (rad >= rho)
    near_brown = np.zeros_like(band)
    for k in (0, 1):
        for step in (-1, 1):
            near_brown |= shifted(band & (rad < rho), k, step, False)
    iface = outer & near_brown
    tags[band] = Region.EIKONAL
    tags[brown] = Region.BROWNIAN
    tags[iface] = Region.INTERFACE
    tags[boundary] = Region.BOUNDARY
    if not np.any(inner):
        raise ConfigurationError("annulus grid has no interior nodes")
    return Grid(h=h, origin=(-L, -L), tags=tags, kind="annulus", normal_sign=-1,
                interface_level=None, params={"r": r, "R": R, "rho": rho, "half_width": L})


def build_grid_radial(r: float, R: float, rho: float, h: float, n: int) -> Grid:
    """Radius grid on ``[r, R]`` for the radial reduction of the annulus problem."""
    g = build_grid_1d(r, R, rho, h, brownian_side="left", kind="radial")
    params = dict(g.params)
    params.update({"r": float(r), "R": float(R), "rho": float(rho), "n": int(n)})
    return Grid(h=g.h, origin=g.origin, tags=g.tags, kind="radial", normal_sign=-1,
                interface_level=g.interface_level, params=params)


def is_on_interface_row(grid: Grid) -> np.ndarray:
    """Nodes whose last coordinate equals the flat interface level."""
    if grid.interface_level is None:
        raise ConfigurationError("grid has no flat interface")
    xn = grid.coords()[..., -1]
    return np.isclose(xn, grid.interface_level, atol=1e-9 * max(1.0, grid.h))


def spacing_ok(length: float, h: float) -> bool:
    q = length / h
    return math.isclose(q, round(q), rel_tol=0, abs_tol=_RATIO_TOL * max(1.0, abs(q)))
