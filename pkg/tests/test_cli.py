"""Tests for the command-line front end."""

import json
import math

import pandas as pd
import pytest

from magwill.cli import main
from magwill.io import manifest_path, read_model
from magwill.types import CalibrationResult, RunManifest


def test_interval_magnitude_with_manifest(tmp_path):
    """M(R) of [0, 2] at R = 1 is 2; the manifest records the run."""
    out = tmp_path / "curve.csv"
    status = main(
        ["magnitude", "--domain", '{"kind": "interval", "length": 2}', "--R", "1",
         "--out", str(out)]
    )
    assert status == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ["R", "value", "n_points", "condition_estimate"]
    assert df["value"].iloc[0] == pytest.approx(2.0, rel=1e-2)
    manifest = read_model(manifest_path(out), RunManifest)
    assert manifest.command == "magnitude"
    assert manifest.parameters["R"] == 1.0
    assert manifest.finished_at is not None


def test_single_point_cloud(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("x\n0.5\n")
    assert main(["magnitude", "--points", str(path), "--R", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0)


def test_point_cloud_grid(cloud_csv, tmp_path):
    out = tmp_path / "cloud_curve.csv"
    assert main(["magnitude", "--points", str(cloud_csv), "--R-grid", "1:4:4",
                 "--out", str(out)]) == 0
    values = pd.read_csv(out)["value"].tolist()
    assert len(values) == 4
    assert all(1.0 <= v <= 40.0 for v in values)


def test_ball_curve_rows_increase(tmp_path):
    out = tmp_path / "ball.csv"
    status = main(["magnitude", "--domain", "ball", "--R-grid", "2:6:5", "--N-max", "65",
                   "--out", str(out)])
    assert status == 0
    df = pd.read_csv(out)
    assert df["R"].tolist() == [2.0, 3.0, 4.0, 5.0, 6.0]
    assert df["value"].is_monotonic_increasing


def test_magnitude_argument_errors(capsys):
    assert main(["magnitude", "--domain", "disc", "--R", "1"]) == 2
    assert main(["magnitude", "--domain", "ball", "--R", "1", "--R-grid", "1,2"]) == 2
    assert main(["magnitude", "--domain", "ball"]) == 2
    assert main(["magnitude", "--R", "1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_geometry_ball(capsys):
    assert main(["geometry", "--domain", "ball"]) == 0
    result = json.loads(capsys.readouterr().out)
    f = result["functionals"]
    assert f["area"] == pytest.approx(4 * math.pi)
    assert f["willmore"] == pytest.approx(4 * math.pi)


def test_geometry_torus_to_file(tmp_path):
    out = tmp_path / "torus.json"
    domain = json.dumps({"kind": "solid_torus", "R0": math.sqrt(2.0), "r0": 1.0})
    assert main(["geometry", "--domain", domain, "--out", str(out)]) == 0
    f = json.loads(out.read_text())["functionals"]
    assert f["willmore"] == pytest.approx(2 * math.pi**2, rel=1e-6)
    assert manifest_path(out).is_file()


def test_falsify_needs_calibration(tmp_path):
    missing = tmp_path / "none.json"
    assert main(["falsify", "--calibration", str(missing)]) == 5
    assert main(["falsify"]) == 5


def test_falsify_with_calibration_file(tmp_path):
    cal = tmp_path / "cal.json"
    cal.write_text(CalibrationResult(lambda3=2.0, uncertainty=0.01).model_dump_json())
    out = tmp_path / "table.csv"
    assert main(["falsify", "--calibration", str(cal), "--quad-order", "32",
                 "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert df["a"].tolist() == [1.0, 0.5, 0.25, 0.125]
    assert df["willmore"].is_monotonic_increasing
    assert df["ratio_c3_V0"].iloc[0] == pytest.approx(8 * math.pi, rel=1e-6)


def test_falsify_single_aspect(tmp_path, capsys):
    cal = tmp_path / "cal.json"
    cal.write_text(CalibrationResult(lambda3=2.0, uncertainty=0.01).model_dump_json())
    assert main(["falsify", "--calibration", str(cal), "--a-grid", "1",
                 "--quad-order", "16"]) == 0
    assert "insufficient" in capsys.readouterr().err.lower()


def test_symbol_check(capsys):
    assert main(["symbol", "check", "--full-symbol", "sqrt(R**2 + xi1**2 + 2)",
                 "--order", "1", "--levels", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["checks"]
    assert all(c["passed"] for c in report["checks"])


def test_symbol_parametrix_and_expect(tmp_path, capsys):
    out = tmp_path / "q.json"
    assert main(["symbol", "parametrix", "--full-symbol", "R**2 + xi1**2", "--order", "2",
                 "--levels", "3", "--cutoff", "-4", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["order"] == -2
    assert main(["symbol", "expect", "--full-symbol", "R**2 + xi1**2", "--order", "2",
                 "--levels", "1", "--k-max", "1"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["re"] == pytest.approx(2 * math.pi)
    assert rows[1]["re"] == pytest.approx(0.0)


def test_symbol_errors():
    assert main(["symbol", "parametrix", "--full-symbol", "R**2", "--order", "2"]) == 2
    assert main(["symbol", "check"]) == 2
    assert main(["symbol", "expect", "--full-symbol", "R", "--order", "1",
                 "--manifold", "sphere"]) == 2


def test_stdout_run_logs_its_manifest(capsys):
    """Without --out the manifest goes to standard error as one JSON line."""
    assert main(["geometry", "--domain", "ball", "--seed", "7"]) == 0
    err = capsys.readouterr().err
    (line,) = [ln for ln in err.splitlines() if ln.startswith("manifest: ")]
    manifest = RunManifest.model_validate_json(line.removeprefix("manifest: "))
    assert manifest.command == "geometry"
    assert manifest.seed == 7
    assert manifest.parameters["domain"] == "ball"


def test_explicit_manifest_path(tmp_path, capsys):
    path = tmp_path / "run.json"
    assert main(["magnitude", "--domain", '{"kind": "interval", "length": 2}', "--R", "1",
                 "--manifest", str(path)]) == 0
    manifest = read_model(path, RunManifest)
    assert manifest.command == "magnitude"
    assert manifest.parameters["tol"] == 1e-3
    assert "manifest: " not in capsys.readouterr().err
