import json
import subprocess
import sys

import pytest

from perforated.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, run
from perforated.domain import HoleSpec, unit_ball, unit_square


@pytest.fixture
def square_file(tmp_path):
    path = tmp_path / "square.json"
    path.write_text(unit_square([HoleSpec((0.5, 0.5), 0.2)]).to_json())
    return path


@pytest.fixture
def disk_file(tmp_path):
    path = tmp_path / "disk.json"
    path.write_text(unit_ball(2, [HoleSpec((0.0, 0.0), 0.2)]).to_json())
    return path


def test_eigen_writes_json(square_file, tmp_path):
    out = tmp_path / "eig"
    assert run(["eigen", "--domain", str(square_file), "--resolution", "32", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "eigen.json").read_text())
    assert data["lambda1"] > 2 * 3.14159**2
    assert data["unknowns"] > 0


def test_eigen_extrapolate(square_file, tmp_path):
    assert run(["eigen", "--domain", str(square_file), "--resolution", "24", "--extrapolate", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "eigen.json").read_text())
    assert data["richardson_order"] == 1
    assert "lambda1_extrapolated" in data


def test_capacity(disk_file, tmp_path):
    assert run(["capacity", "--domain", str(disk_file), "--resolution", "32", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "capacity.json").read_text())
    assert data["capacity"] > 0 and data["clamped_nodes"] > 0


def test_capacity_without_holes_is_usage_error(tmp_path):
    path = tmp_path / "plain.json"
    path.write_text(unit_square().to_json())
    assert run(["capacity", "--domain", str(path), "--out", str(tmp_path)]) == EXIT_USAGE


def test_asymptotics(disk_file, tmp_path):
    argv = ["asymptotics", "--domain", str(disk_file), "--eps", "0.2,0.1", "--resolution", "48", "--out", str(tmp_path)]
    assert run(argv) == EXIT_OK
    assert (tmp_path / "expansion.csv").read_text().count("\n") == 3
    assert json.loads((tmp_path / "summary.json").read_text())["monotone"]


def test_asymptotics_rejects_increasing_eps(disk_file, tmp_path):
    argv = ["asymptotics", "--domain", str(disk_file), "--eps", "0.1,0.2", "--resolution", "32", "--out", str(tmp_path)]
    assert run(argv) == EXIT_USAGE


def test_threshold(tmp_path):
    path = tmp_path / "sq.json"
    path.write_text(unit_square([HoleSpec((0.5, 0.5), 0.05)]).to_json())
    argv = ["threshold", "--domain", str(path), "--beta", "25", "--noise", "linear:alpha=3.4641016151377544",
            "--resolution", "16", "--out", str(tmp_path)]
    assert run(argv) == EXIT_OK
    data = json.loads((tmp_path / "summary.json").read_text())
    # base eigenvalue is Richardson-extrapolated from resolutions 16 and 32
    assert data["margin"] == pytest.approx(0.7392088, abs=1e-4)


def test_simulate_byte_identical(square_file, tmp_path):
    outs = []
    for i, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}"
        argv = ["simulate", "--domain", str(square_file), "--resolution", "16", "--beta", "20",
                "--noise", "linear:alpha=3", "--T", "0.2", "--paths", "10", "--seed", "7",
                "--workers", workers, "--out", str(out)]
        assert run(argv) == EXIT_OK
        outs.append((out / "summary.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert len(list((tmp_path / "run0" / "paths").glob("*.csv"))) == 10


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["eigen"],
    ["eigen", "--domain", "/nonexistent/domain.json"],
    ["simulate", "--domain", "x.json", "--beta", "-1"],
    ["simulate", "--domain", "x.json", "--beta", "1", "--noise", "pink"],
])
def test_usage_errors(argv, tmp_path, capsys):
    if "x.json" in argv:
        (tmp_path / "x.json").write_text(unit_square().to_json())
        argv = [str(tmp_path / "x.json") if a == "x.json" else a for a in argv]
    assert run(argv) == EXIT_USAGE
    assert capsys.readouterr().err


def test_malformed_domain(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(["eigen", "--domain", str(path)]) == EXIT_USAGE


def test_unresolved_hole_is_input_error(tmp_path, capsys):
    path = tmp_path / "tiny.json"
    path.write_text(unit_square([HoleSpec((0.5, 0.5), 0.01)]).to_json())
    assert run(["capacity", "--domain", str(path), "--resolution", "16", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "[domain]" in capsys.readouterr().err


def test_blow_up_is_numeric_failure(tmp_path, capsys):
    path = tmp_path / "sq.json"
    path.write_text(unit_square().to_json())
    argv = ["simulate", "--domain", str(path), "--resolution", "8", "--beta", "1", "--dt", "0.5", "--T", "50",
            "--u0-norm", "1000", "--scheme", "semi_implicit", "--paths", "1", "--out", str(tmp_path)]
    assert run(argv) == EXIT_NUMERIC
    assert "[spde]" in capsys.readouterr().err


def test_help_and_module_entry():
    assert run(["--help"]) == EXIT_OK
    res = subprocess.run([sys.executable, "-m", "perforated", "simulate", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--noise" in res.stdout
