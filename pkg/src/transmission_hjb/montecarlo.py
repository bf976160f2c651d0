"""
Monte Carlo simulation of the hybrid exit-time dynamics.

A particle moves with unit speed along a policy direction while it is in the
closure of the eikonal region and follows a standard Brownian motion (generator
``(1/2) Laplacian``) in the open Brownian region. Paths stop on leaving the
domain; the mean exit time estimates the value function.

Region tests use the exact geometry, not grid tags. Exits and interface
crossings are located by linear interpolation within a step; a Brownian-bridge
test catches crossings that happen between two in-region Brownian positions.
Paths run in fixed-size chunks, each with its own generator seeded from
``(seed, chunk_index)``, so results do not depend on how chunks are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np
from numba import njit

from .errors import ConfigurationError, UsageError
from .geometry import Grid, GridFunction, Region

# geometry kinds
_INTERVAL, _SLAB, _ANNULUS = 0, 1, 2
# interval/slab side codes
_ALL_BROWNIAN, _ALL_EIKONAL = 0, 2
# policy kinds
_GRID_TABLE, _CONSTANT, _NEAREST_EXIT, _RADIAL_TABLE = 0, 1, 2, 3
_BRIDGE_CUTOFF = 40.0
CHUNK_SIZE = 1024


@dataclass(frozen=True)
class SimGeometry:
    """Exact domain description for the simulator.

    Interval: ``(lo, hi)`` with interface at ``iface``; ``side`` is +1 when the
    Brownian region is ``x > iface``, -1 when it is ``x < iface``, 0 when the
    whole interval is Brownian and 2 when it is all eikonal. Slab: box
    ``[x1lo, x1hi] x [x2lo, x2hi]`` with interface ``x2 = iface`` and the same
    side codes. Annulus: ``r < |x| < R`` with Brownian inner ring ``|x| < rho``.
    """

    kind: int
    params: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return 1 if self.kind == _INTERVAL else 2

    @classmethod
    def interval(cls, lo: float, hi: float, iface: float | None = None, side: int = 1) -> SimGeometry:
        if not lo < hi:
            raise ConfigurationError("need lo < hi")
        if iface is None:
            iface = lo
            if side not in (_ALL_BROWNIAN, _ALL_EIKONAL):
                side = _ALL_BROWNIAN
        return cls(_INTERVAL, (float(lo), float(hi), float(iface), float(side)))

    @classmethod
    def slab(cls, box: tuple[float, float, float, float], iface: float, side: int = 1) -> SimGeometry:
        return cls(_SLAB, tuple(float(b) for b in box) + (float(iface), float(side)))

    @classmethod
    def annulus(cls, r: float, R: float, rho: float) -> SimGeometry:
        if not 0 < r < rho < R:
            raise ConfigurationError("need 0 < r < rho < R")
        return cls(_ANNULUS, (float(r), float(R), float(rho)))

    @classmethod
    def from_grid(cls, grid: Grid) -> SimGeometry:
        p = grid.params
        if grid.kind == "interval":
            return cls.interval(p["a"], p["b"], p["interface"], grid.normal_sign)
        if grid.kind == "slab":
            return cls.slab(tuple(p["box"]), p["interface"], grid.normal_sign)
        if grid.kind in ("annulus", "radial"):
            return cls.annulus(p["r"], p["R"], p["rho"])
        raise ConfigurationError(f"no exact geometry for grid kind {grid.kind!r}")

    def region(self, x) -> int:
        """0 outside, 1 eikonal closure, 2 open Brownian region."""
        return int(_region(self.kind, np.asarray(self.params), np.atleast_1d(np.asarray(x, dtype=float))))


class PolicySource(str, Enum):
    STEEPEST_DESCENT = "steepest"
    FIXED = "fixed"
    NEAREST_EXIT = "nearest"


@dataclass
class Policy:
    """Unit direction field used in the eikonal closure."""

    source: PolicySource
    kind: int
    origin: np.ndarray = field(default_factory=lambda: np.zeros(1))
    h: float = 1.0
    shape: np.ndarray = field(default_factory=lambda: np.ones(1, dtype=np.int64))
    table: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    @classmethod
    def fixed(cls, direction) -> Policy:
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        nrm = np.linalg.norm(d)
        if not nrm > 0:
            raise ConfigurationError("direction must be nonzero")
        return cls(PolicySource.FIXED, _CONSTANT, table=(d / nrm).reshape(1, -1))

    @classmethod
    def fixed_field(cls, grid: Grid, func: Callable) -> Policy:
        pts = grid.flat_coords()
        dirs = np.array([np.atleast_1d(func(p)) for p in pts], dtype=float)
        nrm = np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.divide(dirs, nrm, out=np.zeros_like(dirs), where=nrm > 0)
        return cls(PolicySource.FIXED, _GRID_TABLE, np.asarray(grid.origin, dtype=float), grid.h,
                   np.asarray(grid.shape, dtype=np.int64), dirs)

    @classmethod
    def nearest_exit(cls) -> Policy:
        return cls(PolicySource.NEAREST_EXIT, _NEAREST_EXIT)

    @classmethod
    def steepest_descent(cls, u: GridFunction) -> Policy:
        """Upwind descent direction of ``u`` at every node.

        On a radial grid the table stores the sign of the radial direction and
        the simulator applies it along ``x / |x|`` in the plane.
        """
        grid = u.grid
        dirs = _descent_directions(u)
        kind = _RADIAL_TABLE if grid.kind == "radial" else _GRID_TABLE
        return cls(PolicySource.STEEPEST_DESCENT, kind, np.asarray(grid.origin, dtype=float),
                   grid.h, np.asarray(grid.shape, dtype=np.int64), dirs)

    def direction(self, x, geometry: SimGeometry) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        _direction(self.kind, self.origin, self.h, self.shape, self.table,
                   geometry.kind, np.asarray(geometry.params, dtype=float), x, out)
        return out


def _descent_directions(u: GridFunction) -> np.ndarray:
    grid = u.grid
    n = grid.dimension
    vals = np.where(grid.tags != Region.EXTERIOR, u.values, np.inf).ravel()
    nbr = grid.neighbor_table()
    nb_vals = np.where(nbr >= 0, vals[np.maximum(nbr, 0)], np.inf)
    dirs = np.zeros((grid.size, n))
    for k in range(n):
        lo, hi = nb_vals[:, 2 * k], nb_vals[:, 2 * k + 1]
        m = np.minimum(lo, hi)
        drop = np.where(np.isfinite(m), np.maximum(vals - m, 0.0), 0.0)
        dirs[:, k] = np.where(lo <= hi, -drop, drop)
    # boundary nodes point out of the domain, toward their missing neighbors
    outward = np.stack([np.isinf(nb_vals[:, 2 * k + 1]).astype(float) - np.isinf(nb_vals[:, 2 * k])
                        for k in range(n)], axis=1)
    at_edge = (grid.tags.ravel() == Region.BOUNDARY) & np.any(outward != 0, axis=1)
    dirs[at_edge] = outward[at_edge]
    nrm = np.linalg.norm(dirs, axis=1)
    flat = nrm == 0
    if np.any(flat):
        best = np.argmin(nb_vals, axis=1)
        fallback = np.zeros((grid.size, n))
        fallback[np.arange(grid.size), best // 2] = np.where(best % 2 == 0, -1.0, 1.0)
        dirs[flat] = fallback[flat]
        nrm = np.linalg.norm(dirs, axis=1)
    return dirs / nrm[:, None]


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-4
    T_max: float = 20.0
    seed: int = 42
    N: int = 100_000
    reference_h: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.T_max > 0:
            raise ConfigurationError("T_max must be positive")
        if self.N < 2:
            raise ConfigurationError("need at least two paths")
        if self.reference_h is not None and self.dt > self.reference_h**2 / 2 * (1 + 1e-12):
            raise ConfigurationError(
                f"dt = {self.dt} exceeds h^2/2 = {self.reference_h**2 / 2} for the reference grid")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    standard_error: float
    truncated_fraction: float
    N: int
    dt: float
    seed: int
    x0: tuple[float, ...]

    @property
    def reliable(self) -> bool:
        return self.truncated_fraction <= 0.01

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": self.mean,
            "standard_error": self.standard_error,
            "truncated_fraction": self.truncated_fraction,
            "reliable": self.reliable,
            "N": self.N,
            "dt": self.dt,
            "seed": self.seed,
            "x0": list(self.x0),
        }


@njit(cache=True)
def _norm(x):
    s = 0.0
    for v in x:
        s += v * v
    return math.sqrt(s)


@njit(cache=True)
def _region(kind, P, x):
    if kind == _INTERVAL:
        lo, hi, iface, side = P[0], P[1], P[2], P[3]
        if x[0] <= lo or x[0] >= hi:
            return 0
        if side == _ALL_BROWNIAN:
            return 2
        if side == _ALL_EIKONAL:
            return 1
        return 2 if (x[0] - iface) * side > 0 else 1
    if kind == _SLAB:
        if x[0] <= P[0] or x[0] >= P[1] or x[1] <= P[2] or x[1] >= P[3]:
            return 0
        side = P[5]
        if side == _ALL_BROWNIAN:
            return 2
        if side == _ALL_EIKONAL:
            return 1
        return 2 if (x[1] - P[4]) * side > 0 else 1
    s = _norm(x)
    if s <= P[0] or s >= P[1]:
        return 0
    return 2 if s < P[2] else 1


@njit(cache=True)
def _boundary_distance(kind, P, x):
    if kind == _INTERVAL:
        return min(x[0] - P[0], P[1] - x[0])
    if kind == _SLAB:
        return min(min(x[0] - P[0], P[1] - x[0]), min(x[1] - P[2], P[3] - x[1]))
    s = _norm(x)
    return min(s - P[0], P[1] - s)


@njit(cache=True)
def _interface_distance(kind, P, x):
    if kind == _INTERVAL:
        if P[3] == _ALL_BROWNIAN or P[3] == _ALL_EIKONAL:
            return np.inf
        return abs(x[0] - P[2])
    if kind == _SLAB:
        if P[5] == _ALL_BROWNIAN or P[5] == _ALL_EIKONAL:
            return np.inf
        return abs(x[1] - P[4])
    return abs(_norm(x) - P[2])


@njit(cache=True)
def _sphere_hit(x, y, radius):
    """Smallest t in [0, 1] with |x + t (y - x)| = radius, or 2.0 when none."""
    d0 = y[0] - x[0]
    d1 = y[1] - x[1]
    a = d0 * d0 + d1 * d1
    b = 2.0 * (x[0] * d0 + x[1] * d1)
    c = x[0] * x[0] + x[1] * x[1] - radius * radius
    disc = b * b - 4 * a * c
    if a == 0.0 or disc < 0.0:
        return 2.0
    sq = math.sqrt(disc)
    best = 2.0
    t = (-b - sq) / (2 * a)
    if 0.0 <= t <= 1.0:
        best = t
    t = (-b + sq) / (2 * a)
    if 0.0 <= t <= 1.0 and t < best:
        best = t
    return best


@njit(cache=True)
def _exit_fraction(kind, P, x, y):
    """Fraction of the segment x -> y at which it first leaves the domain."""
    best = 1.0
    if kind == _INTERVAL or kind == _SLAB:
        for k in range(x.size):
            d = y[k] - x[k]
            lo = P[2 * k]
            hi = P[2 * k + 1]
            if d > 0 and y[k] >= hi:
                best = min(best, (hi - x[k]) / d)
            elif d < 0 and y[k] <= lo:
                best = min(best, (lo - x[k]) / d)
        return max(best, 0.0)
    t1 = _sphere_hit(x, y, P[0])
    t2 = _sphere_hit(x, y, P[1])
    return max(min(best, min(t1, t2)), 0.0)


@njit(cache=True)
def _interface_fraction(kind, P, x, y):
    if kind == _ANNULUS:
        t = _sphere_hit(x, y, P[2])
        return t if t <= 1.0 else 1.0
    k = 0 if kind == _INTERVAL else 1
    level = P[2] if kind == _INTERVAL else P[4]
    d = y[k] - x[k]
    if d == 0.0:
        return 1.0
    t = (level - x[k]) / d
    return min(max(t, 0.0), 1.0)


@njit(cache=True)
def _project_interface(kind, P, x):
    """Move ``x`` onto the interface in place."""
    if kind == _INTERVAL:
        x[0] = P[2]
    elif kind == _SLAB:
        x[1] = P[4]
    else:
        s = _norm(x)
        for k in range(x.size):
            x[k] = x[k] * P[2] / s


@njit(cache=True)
def _direction(pkind, origin, h, shape, table, gkind, P, x, out):
    """Write the policy direction at ``x`` into ``out``."""
    n = x.size
    for k in range(n):
        out[k] = 0.0
    if pkind == _CONSTANT:
        for k in range(n):
            out[k] = table[0, k]
        return
    if pkind == _NEAREST_EXIT:
        if gkind == _ANNULUS:
            s = _norm(x)
            sgn = 1.0 if P[1] - s <= s - P[0] else -1.0
            for k in range(n):
                out[k] = sgn * x[k] / s
            return
        best = np.inf
        for k in range(n):
            lo = x[k] - P[2 * k]
            hi = P[2 * k + 1] - x[k]
            if lo < best:
                best = lo
                for j in range(n):
                    out[j] = 0.0
                out[k] = -1.0
            if hi < best:
                best = hi
                for j in range(n):
                    out[j] = 0.0
                out[k] = 1.0
        return
    if pkind == _RADIAL_TABLE:
        s = _norm(x)
        i = int(math.floor((s - origin[0]) / h + 0.5))
        i = min(max(i, 0), shape[0] - 1)
        sgn = table[i, 0]
        for k in range(n):
            out[k] = sgn * x[k] / s
        return
    flat = 0
    for k in range(n):
        i = int(math.floor((x[k] - origin[k]) / h + 0.5))
        i = min(max(i, 0), shape[k] - 1)
        flat = flat * shape[k] + i
    for k in range(n):
        out[k] = table[flat, k]


@njit(cache=True, nogil=True)
def _simulate(rng, gkind, P, x0, dt, T_max, pkind, origin, h, shape, table, x, y, v):
    """Exit time of one path and a truncation flag.

    ``x``, ``y`` and ``v`` are scratch buffers of the dimension of ``x0``.
    """
    n = x0.size
    for k in range(n):
        x[k] = x0[k]
    t = 0.0
    sq = math.sqrt(dt)
    reg = _region(gkind, P, x)
    if reg == 0:
        return 0.0, False
    while t < T_max:
        if reg == 1:
            _direction(pkind, origin, h, shape, table, gkind, P, x, v)
            for k in range(n):
                y[k] = x[k] + v[k] * dt
            ry = _region(gkind, P, y)
            if ry == 0:
                return t + _exit_fraction(gkind, P, x, y) * dt, False
            for k in range(n):
                x[k] = y[k]
            t += dt
            reg = ry
            continue
        for k in range(n):
            y[k] = x[k] + sq * rng.standard_normal()
        ry = _region(gkind, P, y)
        if ry == 0:
            return t + _exit_fraction(gkind, P, x, y) * dt, False
        if ry == 1:
            f = _interface_fraction(gkind, P, x, y)
            for k in range(n):
                x[k] = x[k] + f * (y[k] - x[k])
            _project_interface(gkind, P, x)
            t += f * dt
            reg = 1
            continue
        # bridge crossing probabilities below exp(-_BRIDGE_CUTOFF) are skipped
        w = 2.0 * _boundary_distance(gkind, P, x) * _boundary_distance(gkind, P, y) / dt
        if w < _BRIDGE_CUTOFF and rng.random() < math.exp(-w):
            return t + dt, False
        w = 2.0 * _interface_distance(gkind, P, x) * _interface_distance(gkind, P, y) / dt
        t += dt
        for k in range(n):
            x[k] = y[k]
        if w < _BRIDGE_CUTOFF and rng.random() < math.exp(-w):
            _project_interface(gkind, P, x)
            reg = 1
    return T_max, True


@njit(cache=True, nogil=True)
def _simulate_block(rng, count, gkind, P, x0, dt, T_max, pkind, origin, h, shape, table):
    times = np.empty(count)
    trunc = np.zeros(count, dtype=np.bool_)
    x = np.empty(x0.size)
    y = np.empty(x0.size)
    v = np.empty(x0.size)
    for i in range(count):
        times[i], trunc[i] = _simulate(rng, gkind, P, x0, dt, T_max, pkind, origin, h, shape,
                                       table, x, y, v)
    return times, trunc


def _check_start(geometry: SimGeometry, x0) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != geometry.dimension:
        raise UsageError(f"start point has dimension {x0.size}, geometry has {geometry.dimension}")
    P = np.asarray(geometry.params, dtype=float)
    if _region(geometry.kind, P, x0) == 0 and _boundary_distance(geometry.kind, P, x0) < -1e-12:
        raise UsageError(f"start point {x0.tolist()} lies outside the domain")
    return x0


def simulate_path(geometry: SimGeometry, policy: Policy, x0, config: PathConfig,
                  seed: int | None = None) -> tuple[float, bool]:
    """Exit time of a single path and whether it was truncated at ``T_max``."""
    x0 = _check_start(geometry, x0)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    times, trunc = _run_chunk(geometry, policy, x0, config, rng, 1)
    return float(times[0]), bool(trunc[0])


def _run_chunk(geometry, policy, x0, config, rng, count):
    return _simulate_block(rng, int(count), geometry.kind, np.asarray(geometry.params, dtype=float),
                           x0, float(config.dt), float(config.T_max), policy.kind, policy.origin,
                           float(policy.h), policy.shape, policy.table)


def estimate_value(geometry: SimGeometry, policy: Policy, x0, config: PathConfig,
                   workers: int = 1) -> McEstimate:
    """Mean exit time over ``config.N`` independent paths.

    Paths are grouped in chunks of ``CHUNK_SIZE``; chunk ``j`` draws from a
    generator seeded with ``(seed, j)``. Truncated paths contribute ``T_max``.
    ``workers > 1`` runs chunks on threads and gives the same result as the
    sequential run.
    """
    x0 = _check_start(geometry, x0)
    starts = range(0, config.N, CHUNK_SIZE)

    def run(j):
        count = min(CHUNK_SIZE, config.N - starts[j])
        return _run_chunk(geometry, policy, x0, config, np.random.default_rng([config.seed, j]), count)

    if workers <= 1:
        parts = [run(j) for j in range(len(starts))]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(starts))))
    times = np.concatenate([p[0] for p in parts])
    trunc = np.concatenate([p[1] for p in parts])
    return McEstimate(
        mean=float(times.mean()),
        standard_error=float(times.std(ddof=1) / math.sqrt(config.N)),
        truncated_fraction=float(trunc.mean()),
        N=config.N,
        dt=config.dt,
        seed=config.seed,
        x0=tuple(float(v) for v in x0),
    )
