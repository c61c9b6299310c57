import csv
import json
import subprocess
import sys

import numpy as np
import oracles
import pytest

from crowdout import cli
from crowdout.model import baseline_scenario, dumps_scenario

FAST_CHECK = ["--paths", "4000", "--steps", "100", "--directions", "5", "--grid", "513"]


def run(tmp_path, *argv):
    return cli.main([*argv, "--out-dir", str(tmp_path)])


def write_scenario(tmp_path, s, name="scenario.json"):
    p = tmp_path / name
    p.write_text(dumps_scenario(s), encoding="utf-8")
    return p


@pytest.mark.parametrize("cmd", [[], ["solve"], ["sweep"], ["simulate"], ["check"], ["regress"]])
def test_help(cmd):
    proc = subprocess.run([sys.executable, "-m", "crowdout", *cmd, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "usage:" in proc.stdout


def test_solve_baseline(tmp_path):
    assert run(tmp_path, "solve") == 0
    scalars = json.loads((tmp_path / "scalars.json").read_text())
    assert scalars["crowding"] > 0
    assert scalars["eta"] == pytest.approx(0.6312448127939699, rel=1e-10)
    rows = list(csv.reader((tmp_path / "paths.csv").open()))
    assert rows[0] == ["t", "I1_star", "C1_star", "I1_bar", "C1_bar", "I2_bar", "C2_bar"]
    assert len(rows) == 1 + 1025
    manifest = json.loads((tmp_path / "manifest_solve.json").read_text())
    assert manifest["subcommand"] == "solve"
    assert manifest["parameters"]["theta"] == 0.01


def test_solve_without_herding(tmp_path):
    p = write_scenario(tmp_path, baseline_scenario(theta=0.0))
    assert run(tmp_path, "solve", str(p)) == 0
    scalars = json.loads((tmp_path / "scalars.json").read_text())
    assert scalars["crowding"] == 0.0
    assert scalars["k1_star"] == pytest.approx(scalars["k1_bar"], rel=1e-12)


def test_solve_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "solve") == 0 and run(b, "solve") == 0
    assert (a / "paths.csv").read_bytes() == (b / "paths.csv").read_bytes()
    assert (a / "scalars.json").read_bytes() == (b / "scalars.json").read_bytes()


def test_malformed_scenario(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{\"r\": 0.01,\n \"v\": }", encoding="utf-8")
    assert run(tmp_path, "solve", str(p)) == 3
    assert "line 2" in capsys.readouterr().err


def test_invalid_scenario_value(tmp_path, capsys):
    p = write_scenario(tmp_path, baseline_scenario())
    data = json.loads(p.read_text())
    data["sigma"] = -0.1
    p.write_text(json.dumps(data))
    assert run(tmp_path, "solve", str(p)) == 3
    assert "sigma must be > 0" in capsys.readouterr().err


def test_missing_scenario_file(tmp_path):
    assert run(tmp_path, "solve", str(tmp_path / "nope.json")) == 5


def test_sweep_needs_two_points(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "sweep", "--param", "r", "--lo", "0.01", "--hi", "0.02", "--n", "1")
    assert exc.value.code == 2


def test_sweep_bad_range(tmp_path):
    assert run(tmp_path, "sweep", "--param", "r", "--lo", "0.02", "--hi", "0.01", "--n", "3") == 3


@pytest.mark.parametrize("param,lo,hi,direction", [("r", 0.005, 0.025, -1), ("v", 0.05, 0.25, 1),
                                                    ("sigma", 0.05, 0.25, -1)])
def test_sweep_direction(tmp_path, param, lo, hi, direction):
    assert run(tmp_path, "sweep", "--param", param, "--lo", str(lo), "--hi", str(hi), "--n", "6", "--svg") == 0
    rows = list(csv.reader((tmp_path / f"sweep_{param}.csv").open()))[1:]
    crowd = np.array([float(r[2]) for r in rows])
    assert np.all(direction * np.diff(crowd) > 0)
    assert (tmp_path / f"sweep_{param}.svg").read_text().startswith("<svg")


def test_sweep_deterministic(tmp_path):
    args = ("sweep", "--param", "v", "--lo", "0.05", "--hi", "0.25", "--n", "5", "--T", "5")
    assert run(tmp_path / "a", *args) == 0 and run(tmp_path / "b", *args) == 0
    assert (tmp_path / "a" / "sweep_v.csv").read_bytes() == (tmp_path / "b" / "sweep_v.csv").read_bytes()


def test_simulate_deterministic(tmp_path):
    args = ("simulate", "--paths", "2000", "--steps", "100", "--dump-paths", "3")
    assert run(tmp_path / "a", *args) == 0 and run(tmp_path / "b", *args) == 0
    for name in ("simulation.json", "paths_dump.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rec = json.loads((tmp_path / "a" / "simulation.json").read_text())
    assert abs(rec["z_scores"]["mean"]) < 4
    assert (tmp_path / "a" / "manifest_simulate.json").exists()


def test_check_passes(tmp_path, capsys):
    assert run(tmp_path, "check", *FAST_CHECK) == 0
    out = capsys.readouterr().out
    assert "8/8 checks passed" in out
    assert len(json.loads((tmp_path / "check.json").read_text())) == 8


def test_check_detects_corrupted_eta(tmp_path, capsys):
    assert run(tmp_path, "check", *FAST_CHECK, "--corrupt-eta", "1.5") == 1
    assert "[FAIL] eta self-consistency" in capsys.readouterr().out


def write_regression_csv(tmp_path, cols):
    p = tmp_path / "data.csv"
    names = list(cols)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(len(cols[names[0]])):
            w.writerow([repr(float(cols[n][i])) for n in names])
    return p


def test_regress(tmp_path, capsys):
    p = write_regression_csv(tmp_path, oracles.synthetic_regression())
    rc = run(tmp_path, "regress", str(p), "--response", "CE", "--regressors", ",".join(oracles.REGRESSORS))
    assert rc == 0
    text = (tmp_path / "regression.txt").read_text()
    assert "Observations" in text and "Model Statistics" in text
    recs = json.loads((tmp_path / "regression.json").read_text())
    assert len([r for r in recs if r["kind"] == "coefficient"]) == 6
    assert (tmp_path / "manifest_regress.json").exists()


def test_regress_transforms(tmp_path):
    cols = oracles.synthetic_regression()
    cols["CE"] = cols["CE"] + 5.0
    p = write_regression_csv(tmp_path, cols)
    rc = run(tmp_path, "regress", str(p), "--response", "CE", "--regressors", "TRS,CSSD",
             "--growth", "CE", "--normalize", "all")
    assert rc == 0
    recs = json.loads((tmp_path / "regression.json").read_text())
    assert next(r for r in recs if r["name"] == "n_observations")["value"] == 39


def test_regress_missing_column(tmp_path, capsys):
    p = write_regression_csv(tmp_path, oracles.synthetic_regression())
    assert run(tmp_path, "regress", str(p), "--response", "CE", "--regressors", "TRS,GDP") == 3
    assert "'GDP'" in capsys.readouterr().err


def test_regress_constant_column(tmp_path, capsys):
    cols = oracles.synthetic_regression()
    cols["TRS"] = np.ones(40)
    p = write_regression_csv(tmp_path, cols)
    assert run(tmp_path, "regress", str(p), "--response", "CE", "--regressors", "TRS",
               "--normalize", "TRS") == 3
    assert "cannot normalize constant column 'TRS'" in capsys.readouterr().err
