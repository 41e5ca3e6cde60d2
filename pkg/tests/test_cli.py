import hashlib
import json

import numpy as np
import pytest

from dynrecon import cli
from dynrecon.experiments import CheckResult, ExperimentConfig, default_config


def write_config(tmp_path, **overrides):
    data = {**default_config("torus"), **overrides}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


SMALL_FORECAST = dict(train_n=1500, ensemble=20, n_max=60, spacing=5, gap=20)


def test_forecast_outputs_and_manifest(tmp_path):
    cfg_path = write_config(tmp_path, **SMALL_FORECAST)
    out = tmp_path / "out"
    rc = cli.main(["forecast", "--config", str(cfg_path), "--out", str(out), "--quiet"])
    assert rc == 0
    curves = out / "error_curves.csv"
    lines = curves.read_text().splitlines()
    assert lines[0] == "horizon,error_direct,error_iter,autocorr,bound"
    assert len(lines) == 62  # header + horizons 0..60
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.0
    assert abs(float(first[3]) - 1.0) < 1e-10
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["outputs"].items():
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert actual == digest
    summary = json.loads((out / "summary.json").read_text())
    assert summary["delta_1"] < 1e-6


def test_forecast_reproducible_byte_identical(tmp_path):
    cfg_path = write_config(tmp_path, **SMALL_FORECAST)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["forecast", "--config", str(cfg_path), "--out", str(out1), "--quiet"]) == 0
    assert cli.main(["forecast", "--config", str(cfg_path), "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "error_curves.csv").read_bytes() == (out2 / "error_curves.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_flag_overrides_config(tmp_path):
    cfg_path = write_config(tmp_path, **SMALL_FORECAST)
    out = tmp_path / "out"
    rc = cli.main([
        "forecast", "--config", str(cfg_path), "--out", str(out), "--seed", "7", "--quiet"
    ])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7


def test_validation_exit_code_and_field_name(tmp_path, capsys):
    cfg_path = write_config(tmp_path, markov_resolution=0)
    rc = cli.main(["markov", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "markov_resolution" in err


def test_unknown_field_rejected(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"system": "torus", "no_such_knob": 1}))
    rc = cli.main(["forecast", "--config", str(path), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "no_such_knob" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg_path = write_config(
        tmp_path, system="l63", dt=50.0, spinup=100, hypothesis="gaussian-kernel",
        ridge="auto", **{k: v for k, v in SMALL_FORECAST.items()},
    )
    rc = cli.main(["forecast", "--config", str(cfg_path), "--out", str(tmp_path / "o"), "--quiet"])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_markov_outputs(tmp_path):
    cfg_path = write_config(tmp_path, markov_build_n=5000, markov_independent_n=5000)
    out = tmp_path / "out"
    rc = cli.main(["markov", "--config", str(cfg_path), "--out", str(out), "--quiet"])
    assert rc == 0
    from dynrecon.markov import read_coo

    P = read_coo(out / "transition_matrix.txt")
    sums = np.asarray(P.sum(axis=0)).ravel()
    assert np.max(np.abs(sums[sums > 0] - 1.0)) <= 1e-12
    law_header = (out / "law.csv").read_text().splitlines()[0]
    assert law_header == "cell,centroid_0,image_0,dispersion"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["tv_stationary_uniform"] <= 0.05


def test_lyapunov_outputs(tmp_path):
    cfg_path = write_config(tmp_path, lyap_n=3000)
    out = tmp_path / "out"
    rc = cli.main(["lyapunov", "--config", str(cfg_path), "--out", str(out), "--quiet"])
    assert rc == 0
    lines = (out / "lyapunov_curve.csv").read_text().splitlines()
    assert lines[0] == "step,lambda1_running,lambda2_running"
    summary = json.loads((out / "summary.json").read_text())
    assert max(abs(v) for v in summary["exponents_per_time"]) <= 1e-8


def test_checks_subcommand_exit_codes(tmp_path, monkeypatch):
    ok = [CheckResult(name="x", passed=True, value=0.0, tolerance=1.0)]
    monkeypatch.setattr(cli, "checks_suite", lambda cfg: ok)
    rc = cli.main(["checks", "--out", str(tmp_path / "a"), "--quiet"])
    assert rc == 0
    bad = [CheckResult(name="x", passed=False, value=2.0, tolerance=1.0)]
    monkeypatch.setattr(cli, "checks_suite", lambda cfg: bad)
    rc = cli.main(["checks", "--out", str(tmp_path / "b"), "--quiet"])
    assert rc == 3
    rows = (tmp_path / "b" / "checks.csv").read_text().splitlines()
    assert rows[0] == "name,passed,value,tolerance,detail"
    assert rows[1].startswith("x,0,")


def test_default_config_requires_no_file(tmp_path):
    rc = cli.main(["lyapunov", "--system", "torus", "--out", str(tmp_path / "o"), "--quiet"])
    assert rc == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["system"] == "torus"
    assert "dynrecon" in manifest["versions"]
