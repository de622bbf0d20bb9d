import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from starwave.cli import main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_verify_default_passes(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["verify", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    names = {s["name"] for s in report["suites"]}
    assert {"graphfun", "resolvent", "spectra", "evolve", "fem"} <= names
    assert all(s["passed"] for s in report["suites"])
    assert "PASS" in capsys.readouterr().out


def test_verify_tight_fem_tolerance_fails(tmp_path):
    assert main(["verify", "--tol", "fem=1e-15", "--out", str(tmp_path / "r.json")]) == 1


def test_pseudospec_at_critical_coupling_exits_2(tmp_path, capsys):
    assert main(["pseudospec", "--alpha", "2,0", "--out", str(tmp_path / "p.csv")]) == 2
    assert "critical" in capsys.readouterr().err.lower()


def test_pseudospec_grid_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["pseudospec", "--out", str(a), "--workers", "1"]) == 0
    assert main(["pseudospec", "--out", str(b), "--workers", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert len(rows) == 1681
    assert list(rows[0]) == ["re_z", "im_z", "re_alpha", "im_alpha", "norm_lower", "eta_bound", "axis_bound"]
    assert b"\r" not in a.read_bytes()
    side = json.loads((tmp_path / "a.csv.json").read_text())
    assert side["config"]["alpha"] == [2.5, 0.0] and side["config"]["n_edges"] == 2


def test_evolve_energy_constant(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["evolve", "--alpha", "0,2", "--times", "0,5,51", "--out", str(out)]) == 0
    E = np.array([float(r["energy"]) for r in read_csv(out)])
    assert E.size == 51
    assert np.max(np.abs(E / E[0] - 1)) <= 1e-9
    rows = read_csv(out)
    assert max(float(r["robin_abs"]) for r in rows) <= 1e-8


def test_eigchain_rows(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["eigchain", "--edges", "3", "--z", "0.5,1", "--length", "5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4, 5]
    assert max(float(r["chain_residual"]) for r in rows) <= 1e-10
    assert main(["eigchain", "--edges", "3", "--alpha", "1,0", "--out", str(out)]) == 2


def test_converge_monotone(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["converge", "--nlist", "4,8,16,32,64", "--elements-per-edge", "1500", "--out", str(out)]) == 0
    gaps = [float(r["sup_gap"]) for r in read_csv(out)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    diag = json.loads((tmp_path / "g.csv.json").read_text())["diagnostics"]
    assert abs(diag["fitted_slope"] + 0.5) <= 0.2
    assert main(["converge", "--alpha", "1,0", "--z", "1,0", "--out", str(out)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scan\nedges = 3\nalpha = 4,1\nzgrid = 0.5,1,2,-1,1,3\n")
    out = tmp_path / "p.csv"
    assert main(["pseudospec", "--config", str(cfg), "--alpha", "5,0", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 6
    assert {r["re_alpha"] for r in rows} == {"5"}
    side = json.loads((tmp_path / "p.csv.json").read_text())["config"]
    assert side["n_edges"] == 3 and side["alpha"] == [5.0, 0.0]
    assert side["zgrid"] == [0.5, 1.0, 2, -1.0, 1.0, 3]


def test_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["pseudospec", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["pseudospec", "--zgrid", "0,1,2", "--out", str(tmp_path / "x.csv")]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "c.csv"
    r = subprocess.run([sys.executable, "-m", "starwave", "eigchain", "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "rows" in r.stdout
