import json
import math

import numpy as np
import pytest

from transmission_hjb.closed_forms import eval_annulus, solve_annulus
from transmission_hjb.config import (
    build_problem,
    expression_function,
    load_config,
    solver_config,
)
from transmission_hjb.errors import ConfigurationError
from transmission_hjb.geometry import GridFunction, Region, build_grid_2d, Annulus
from transmission_hjb.io import dumps_json, read_solution_csv, write_solution_csv, write_table_csv
from transmission_hjb.scheme import InterfaceRule, solve

BASE = {
    "geometry": {"kind": "interval", "h": 0.02},
    "operators": {"first_order": {"form": "eikonal", "speed": 1.0},
                  "second_order": {"form": "half_neg_laplacian", "rhs": 1.0,
                                   "lambda": 0.5, "lambda_bar": 0.5}},
    "boundary": {"kind": "constant", "value": 0.0},
    "solver": {"rule": "strong"},
}


def test_load_and_echo(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(BASE))
    cfg = load_config(path)
    assert cfg.solver.rule == InterfaceRule.STRONG_EIKONAL
    echo = cfg.echo()
    assert echo["operators"]["second_order"]["lambda"] == 0.5
    assert load_config(echo).echo() == echo


def test_unknown_key_rejected():
    bad = json.loads(json.dumps(BASE))
    bad["solver"]["colour"] = "blue"
    with pytest.raises(ConfigurationError, match="colour"):
        load_config(bad)


def test_overrides():
    cfg = load_config(BASE, {"geometry.h": 0.05, "boundary.value": 1.5})
    assert cfg.geometry.h == 0.05 and cfg.boundary.value == 1.5


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")


def test_expression_boundary():
    cfg = load_config({**BASE, "geometry": {"kind": "slab", "h": 0.25},
                       "boundary": {"kind": "expression", "expr": "x1**2 + sin(x2)"}})
    pb = build_problem(cfg)
    pts = pb.grid.flat_coords()
    bnd = (pb.grid.tags == Region.BOUNDARY).ravel()
    np.testing.assert_allclose(pb.g.ravel()[bnd], (pts[:, 0] ** 2 + np.sin(pts[:, 1]))[bnd])


def test_expression_with_unknown_symbol():
    with pytest.raises(ConfigurationError, match="unknown symbols"):
        expression_function("x1 + y", 2)


def test_oracle_data_solves_to_closed_form():
    cfg = load_config({**BASE, "geometry": {"kind": "interval", "h": 0.01},
                       "boundary": {"kind": "oracle1d", "alpha": -1.0},
                       "operators": {"second_order": {"rhs": 0.0}}})
    pb = build_problem(cfg)
    u, diag = solve(pb, solver_config(cfg))
    x = pb.grid.axis(0)
    exact = 0.5 - np.abs(x + 0.5)
    exact[x > 0] = (-1.0) * x[x > 0]
    assert np.abs(u.values - exact).max() <= 0.02


def test_radial_config_matches_annulus():
    cfg = load_config({"geometry": {"kind": "radial", "h": 0.02}, "boundary": {"kind": "annulus"}})
    pb = build_problem(cfg)
    u, _ = solve(pb)
    exact = eval_annulus(solve_annulus(2, 0.5, 2.0, 1.5), pb.grid.axis(0))
    assert np.abs(u.values - exact).max() <= 5 * 0.02


def test_shifted_eikonal_needs_center():
    cfg = load_config({**BASE, "operators": {"first_order": {"form": "shifted_eikonal"}}})
    with pytest.raises(ConfigurationError):
        build_problem(cfg)


def test_solution_csv_round_trip(tmp_path):
    grid = build_grid_2d(Annulus(0.5, 2.0), 1.5, 0.25)
    vals = np.where(grid.tags != Region.EXTERIOR, np.arange(grid.size).reshape(grid.shape) / 7, 0.0)
    u = GridFunction(grid, vals, grid.tags != Region.EXTERIOR)
    path = write_solution_csv(u, tmp_path / "u.csv")
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,u,tag"
    back = read_solution_csv(path, grid)
    np.testing.assert_array_equal(back.mask, u.mask)
    np.testing.assert_array_equal(back.values[u.mask], u.values[u.mask])
    rebuilt = read_solution_csv(path)
    assert rebuilt.grid.size >= int(u.mask.sum())


def test_json_handles_nonfinite_and_numpy():
    text = dumps_json({"a": np.float64(math.inf), "b": np.arange(3), "c": (1, 2)})
    assert json.loads(text) == {"a": "inf", "b": [0, 1, 2], "c": [1, 2]}


def test_table_csv(tmp_path):
    path = write_table_csv([{"h": 0.1, "error": 0.2}, {"h": 0.05, "error": 0.1, "order": 1.0}],
                           tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["h", "error"]
    assert len(lines) == 3
