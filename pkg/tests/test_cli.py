"""End-to-end CLI exercises through main(argv) with tiny configs."""

import csv
import json
import math
import os

import pytest

from anisowave import cli
from anisowave import harness as H


@pytest.fixture()
def run_config(tmp_path):
    cfg = {
        "seed": 3,
        "grid": {"n": 32, "box_length": 32.0},
        "system": {"m": 1, "eps": [[1.0, 1.0, 1.0]], "epsilon0": 1e-3},
        "data": {"kind": "bump", "width": 1.3, "support_radius": 6.0,
                 "normalize": {"mode": "functional"}},
        "run": {"t0": 1.0, "t_end": 6.0,
                "diagnostics_times": [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0]},
        "diagnostics": {"k_max": 2, "k_mid": 1, "k_low": 1, "cone_bins": 4},
        "analysis": {
            "monitors": ["thm4"],
            "fits": [{"column": "K_1", "window": [1.5, 6.0],
                      "name": "pointwise_decay"}],
        },
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_run_subcommand(run_config, tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = cli.main(["run", run_config, "--out", out])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "[PASS] l1_data_bootstrap" in printed
    assert "[----]" in printed
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["config"]["seed"] == 3
    assert manifest["monitors"][0]["mode"] == "thm4"
    assert "series" not in manifest["monitors"][0]
    assert "pointwise_decay" in manifest["fits"]
    assert os.path.exists(os.path.join(out, "diagnostics.csv"))
    assert os.path.exists(os.path.join(out, "verdict.json"))


def test_run_seed_env_override(run_config, tmp_path, monkeypatch):
    out = str(tmp_path / "out2")
    monkeypatch.setenv("ANISO_SEED", "41")
    assert cli.main(["run", run_config, "--out", out]) == 0
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["config"]["seed"] == 41


def test_run_failing_fit_check(run_config, tmp_path, capsys):
    cfg = json.load(open(run_config))
    # a free-wave pointwise sup does not decay like t^{-7}
    cfg["analysis"]["fits"][0].update(
        {"expect": -7.0, "tolerance": 0.01, "check": "uniform_decay"})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    rc = cli.main(["run", str(bad), "--out", str(tmp_path / "out3")])
    assert rc == 1
    assert "[FAIL] uniform_decay" in capsys.readouterr().out


def test_report_subcommand(run_config, tmp_path, capsys):
    out = str(tmp_path / "out")
    cli.main(["run", run_config, "--out", out])
    capsys.readouterr()
    rc = cli.main(["report", out])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "config hash:" in printed
    assert os.path.exists(os.path.join(out, "plots", "K_replot.svg"))


def test_decay_fit_subcommand(tmp_path, capsys):
    path = tmp_path / "series.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "K_1"])
        for i in range(10):
            t = 2.0 + i
            writer.writerow([t, 5.0 * t**-1.5])
    rc = cli.main(["decay-fit", str(path), "--col", "K_1"])
    assert rc == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["exponent"] == pytest.approx(-1.5, abs=1e-12)
    assert fit["r2"] == pytest.approx(1.0)

    rc = cli.main(["decay-fit", str(path), "--col", "K_1",
                   "--window", "100", "200"])
    assert rc == 2
    with pytest.raises(SystemExit):
        cli.main(["decay-fit", str(path), "--col", "nope"])


def test_verify_identities_skip_calibration(tmp_path, capsys):
    rc = cli.main(["verify-identities", "--skip-calibration",
                   "--out", str(tmp_path / "iout")])
    printed = capsys.readouterr().out
    assert rc == 0
    assert "[PASS] scaling_commutation" in printed
    reports = json.load(open(tmp_path / "iout" / "identities.json"))
    assert {r["check"] for r in reports} >= {
        "scaling_commutation", "operator_decomposition", "integrated_bochner"}
    assert not any(r["check"].startswith("regression_") for r in reports)


def test_measure_sweep_subcommand(tmp_path, capsys):
    cfg = tmp_path / "measure.json"
    cfg.write_text(json.dumps({"measure": {
        "k_range": [-1, 1], "l_range": [-6, 0], "betas": [0.5, 1.0],
        "mus": [1, -1], "mc_samples": 20000, "seed": 11}}))
    out = str(tmp_path / "mout")
    rc = cli.main(["measure-sweep", str(cfg), "--out", out])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "[PASS] ratio_bound" in printed
    assert "[PASS] mc_agreement" in printed
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["cells"] == 3 * 7 * 2 * 2
    assert summary["mc"]["agree_3sigma"] == summary["mc"]["cells"]
    assert math.isfinite(summary["max_ratio"])
    with open(os.path.join(out, "sweep.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == summary["cells"]


def test_bootstrap_subcommand(run_config, tmp_path, capsys):
    out = str(tmp_path / "bout")
    rc = cli.main(["bootstrap", run_config, "--mode", "thm4", "--out", out])
    assert rc == 0
    assert "[PASS] l1_data_bootstrap" in capsys.readouterr().out
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["monitors"][0]["pass"] is True


def test_column_series_mapping():
    rows = [H.DiagnosticsRow.from_dict(
        {"t": float(t), "E": [1.0, 2.0], "K": [3.0, 4.0], "W": [5.0, 6.0],
         "N_high": [], "N_low": [], "cone": [[7.0, 8.0], [9.0, 10.0]],
         "cone_edges": [0.0, 1.0, 2.0]}) for t in (1, 2)]
    assert cli._column_series(rows, "E_2") == [(1.0, 2.0), (2.0, 2.0)]
    assert cli._column_series(rows, "K_1") == [(1.0, 3.0), (2.0, 3.0)]
    assert cli._column_series(rows, "cone_2_1") == [(1.0, 10.0), (2.0, 10.0)]
    assert cli._column_series(rows, "N_high_1") == []
    with pytest.raises(ValueError):
        cli._column_series(rows, "Q_1")
