"""
CSV and JSON output.

Solution CSVs carry one row per node with columns ``x1 .. xn, u, tag``. Floats
are written with ``repr`` so that reading them back reproduces the values
exactly. JSON reports are written with sorted keys for byte-stable output.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import ConfigurationError
from .geometry import Grid, GridFunction, Region


def _fmt(v: float) -> str:
    return repr(float(v))


def write_solution_csv(u: GridFunction, path: str | Path, include_exterior: bool = False) -> Path:
    """Write node coordinates, values and region tags."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = u.grid
    pts = grid.flat_coords()
    vals = u.values.ravel()
    tags = grid.tags.ravel()
    active = u.mask.ravel()
    keep = np.ones(grid.size, dtype=bool) if include_exterior else tags != Region.EXTERIOR
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(grid.dimension)] + ["u", "tag"])
        for i in np.flatnonzero(keep):
            value = _fmt(vals[i]) if active[i] else "nan"
            w.writerow([_fmt(c) for c in pts[i]] + [value, Region(int(tags[i])).name])
    return path


def read_solution_csv(path: str | Path, grid: Grid | None = None) -> GridFunction:
    """Read a solution CSV.

    With ``grid`` given, rows are matched to its nodes by coordinates; otherwise
    the grid is rebuilt from the rows (nodes missing from the file become
    EXTERIOR).
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    dim = len(header) - 2
    if dim < 1 or header[-2:] != ["u", "tag"]:
        raise ConfigurationError(f"{path}: expected columns x1..xn,u,tag, got {header}")
    pts = np.array([[float(c) for c in r[:dim]] for r in body])
    vals = np.array([float(r[dim]) for r in body])
    tags = np.array([Region[r[dim + 1]] for r in body], dtype=np.int8)
    if grid is None:
        grid = Grid.from_nodes(pts, tags)
    if grid.dimension != dim:
        raise ConfigurationError(f"{path} has dimension {dim}, grid has {grid.dimension}")
    ids = np.rint((pts - np.asarray(grid.origin)) / grid.h).astype(int)
    if np.any(ids < 0) or np.any(ids >= np.asarray(grid.shape)):
        raise ConfigurationError(f"{path}: nodes fall outside the grid")
    values = np.full(grid.shape, np.nan)
    values[tuple(ids.T)] = vals
    mask = np.zeros(grid.shape, dtype=bool)
    mask[tuple(ids.T)] = np.isfinite(vals)
    if np.any(mask & (grid.tags == Region.EXTERIOR)):
        raise ConfigurationError(f"{path}: values given on exterior nodes of the grid")
    return GridFunction(grid, np.where(mask, values, 0.0), mask)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), (str, int)):
        return obj.value
    return obj


def dumps_json(obj: Any) -> str:
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def write_table_csv(rows: Iterable[dict[str, Any]], path: str | Path) -> Path:
    """Write a list of homogeneous dicts as CSV with round-trip floats."""
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r.get(c) is None else (_fmt(r[c]) if isinstance(r[c], (float, np.floating))
                                                     else r[c]) for c in cols])
    return path
