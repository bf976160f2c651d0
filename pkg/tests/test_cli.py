import json

import numpy as np
import pytest

from transmission_hjb.cli import main
from transmission_hjb.io import read_solution_csv

PROBLEM = {
    "geometry": {"kind": "interval", "h": 0.02},
    "operators": {"first_order": {"form": "eikonal", "speed": 1.0},
                  "second_order": {"form": "half_neg_laplacian", "rhs": 1.0}},
    "boundary": {"kind": "constant", "value": 0.0},
    "solver": {"rule": "strong"},
}


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(PROBLEM))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_solve_verify_round_trip(tmp_path, problem_file, capsys):
    sol = tmp_path / "u.csv"
    code, payload = run(capsys, "solve", "--config", problem_file, "--out", sol,
                        "--report", tmp_path / "d.json")
    assert code == 0 and payload["diagnostics"]["converged"]
    assert (tmp_path / "d.json").exists()
    u = read_solution_csv(sol)
    assert u.values[np.isclose(u.grid.axis(0), 0.5)][0] == pytest.approx(0.75, abs=0.02)
    code, payload = run(capsys, "verify", "--config", problem_file, "--solution", sol)
    assert code == 0 and payload["report"]["summary"]["passed"]


def test_verify_rejects_corrupted_solution(tmp_path, problem_file, capsys):
    sol = tmp_path / "u.csv"
    run(capsys, "solve", "--config", problem_file, "--out", sol, "--report", tmp_path / "d.json")
    lines = sol.read_text().splitlines()
    cols = lines[25].split(",")
    cols[1] = str(float(cols[1]) + 0.5)
    lines[25] = ",".join(cols)
    sol.write_text("\n".join(lines) + "\n")
    code, payload = run(capsys, "verify", "--config", problem_file, "--solution", sol)
    assert code == 1 and not payload["report"]["summary"]["passed"]


def test_unknown_config_key_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**PROBLEM, "extra": 1}))
    assert main(["solve", "--config", str(path)]) == 2
    assert "extra" in capsys.readouterr().err


def test_set_override(tmp_path, problem_file, capsys):
    code, payload = run(capsys, "solve", "--config", problem_file, "--set", "geometry.h=0.05",
                        "--out", tmp_path / "u.csv", "--report", tmp_path / "d.json")
    assert code == 0 and payload["config"]["geometry"]["h"] == 0.05


def test_oracle1d(tmp_path, capsys):
    code, payload = run(capsys, "oracle1d", "--alpha", -1, "--h", 0.05, "--out", tmp_path / "o.csv")
    assert code == 0 and payload["beta"] == -0.5
    u = read_solution_csv(tmp_path / "o.csv")
    np.testing.assert_allclose(u.values[u.grid.axis(0) == -0.5], 0.5)
    code, payload = run(capsys, "oracle1d", "--alpha", -3)
    assert payload["exists"] is False


def test_annulus(tmp_path, capsys):
    code, payload = run(capsys, "annulus", "--rho", 1.5, "--h", 0.05, "--out", tmp_path / "a.csv")
    assert code == 0 and payload["feasible"] and max(payload["residuals"]) <= 1e-12
    code, payload = run(capsys, "annulus")
    assert payload["rho"] == pytest.approx(0.99722726, abs=1e-7)
    code, payload = run(capsys, "annulus", "--rho", 0.52)
    assert code == 1 and payload["feasible"] is False


def test_regularize(tmp_path, problem_file, capsys):
    sol = tmp_path / "u.csv"
    run(capsys, "solve", "--config", problem_file, "--out", sol, "--report", tmp_path / "d.json")
    code, payload = run(capsys, "regularize", "--config", problem_file, "--solution", sol,
                        "--eps", 0.05, "--out-csv", tmp_path / "w.csv")
    assert code == 0 and payload["semiconvexity_defect"] >= -0.2
    assert (tmp_path / "w.csv").exists()


def test_mc(tmp_path, problem_file, capsys):
    sol = tmp_path / "u.csv"
    run(capsys, "solve", "--config", problem_file, "--set", "geometry.h=0.05", "--out", sol,
        "--report", tmp_path / "d.json")
    code, payload = run(capsys, "mc", "--config", problem_file, "--set", "geometry.h=0.05",
                        "--solution", sol, "--x0", 0.5, "--paths", 2000, "--dt", 1e-3, "--seed", 1)
    assert code == 0 and abs(payload["estimate"]["mean"] - 0.75) <= 0.05
    code, _ = run(capsys, "mc", "--policy", "fixed", "--x0", 0.5, "--paths", 10)
    assert code == 2


def test_convergence(tmp_path, capsys):
    code, payload = run(capsys, "convergence", "--h", 0.05, 0.025, "--out-csv", tmp_path / "c.csv")
    assert code == 0 and payload["rows"][1]["order"] == pytest.approx(1.0, abs=0.2)


def test_suite_fault_injection(capsys):
    code, payload = run(capsys, "suite", "comparison", "--fast")
    assert code == 0 and payload["passed"]
    code, payload = run(capsys, "suite", "comparison", "--fast", "--inject-fault")
    assert code == 1 and not payload["passed"]


def test_unknown_suite(capsys):
    assert main(["suite", "nope"]) == 2
