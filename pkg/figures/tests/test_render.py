"""Tests drive the renderer off real dynrecon CLI outputs, consuming the
primary package only through its command line and CSV files."""

import hashlib
import json
import struct
import subprocess
import sys

import pytest

from figpanels import FigureSpec, RenderError, load_curves, render
from figpanels.cli import main as render_main


def run_dynrecon(args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "dynrecon.cli", *args], cwd=cwd, capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def cli_outputs(tmp_path_factory):
    # the reference configurations behind the torus and L63 acceptance
    # targets; the L63 run dominates the suite's wall time but is shared
    base = tmp_path_factory.mktemp("cli")
    run_dynrecon(["forecast", "--system", "torus", "--out", str(base / "torus"), "--quiet"], base)
    run_dynrecon(["forecast", "--system", "l63", "--out", str(base / "l63"), "--quiet"], base)
    return {
        "torus": base / "torus" / "error_curves.csv",
        "l63": base / "l63" / "error_curves.csv",
    }


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def png_dims(path):
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    w, h = struct.unpack(">II", data[16:24])
    return w, h


def test_renders_all_layouts_without_error(cli_outputs, tmp_path):
    # the acceptance path: all three layouts from the cli outputs, the
    # dashed slope line present on error-analysis, inputs untouched
    before = {k: sha(p) for k, p in cli_outputs.items()}
    specs = {
        "forecast-compare": FigureSpec(
            layout="forecast-compare",
            inputs=[{"path": str(cli_outputs["l63"]), "label": "L63 delay"}],
        ),
        "torus-vs-mixed": FigureSpec(
            layout="torus-vs-mixed",
            inputs=[
                {"path": str(cli_outputs["torus"]), "label": "torus"},
                {"path": str(cli_outputs["l63"]), "label": "mixed"},
            ],
        ),
        "error-analysis": FigureSpec(
            layout="error-analysis",
            inputs=[{"path": str(cli_outputs["l63"]), "label": "L63"}],
            overlays={"slope": 0.9056 * 0.01, "bound": True},
        ),
    }
    for name, spec in specs.items():
        report = render(spec, tmp_path / name)
        assert report, f"layout {name} produced no panels"
        for info in report.values():
            assert (tmp_path / name / info["path"].split("/")[-1]).exists()
    analysis = render(specs["error-analysis"], tmp_path / "error-analysis-2")
    iter_panels = [v for k, v in analysis.items() if k.startswith("error-analysis-iter")]
    assert iter_panels and all(p["slope_line"] for p in iter_panels)
    direct_panels = [v for k, v in analysis.items() if k.startswith("error-analysis-direct")]
    assert direct_panels and all(p["bound_curve"] for p in direct_panels)
    after = {k: sha(p) for k, p in cli_outputs.items()}
    assert before == after  # rendering is read-only


def test_forecast_compare_has_reference_lines(cli_outputs, tmp_path):
    spec = FigureSpec(
        layout="forecast-compare",
        inputs=[{"path": str(cli_outputs["l63"]), "label": "L63"}],
    )
    report = render(spec, tmp_path)
    (info,) = report.values()
    assert info["reference_lines"]


def test_empty_overlays_draw_curves_only(cli_outputs, tmp_path):
    spec = FigureSpec(
        layout="error-analysis",
        inputs=[{"path": str(cli_outputs["l63"]), "label": "L63"}],
        overlays={},
    )
    report = render(spec, tmp_path)
    iter_info = [v for k, v in report.items() if "iter" in k][0]
    direct_info = [v for k, v in report.items() if "direct" in k][0]
    assert not iter_info["slope_line"]
    assert not direct_info["bound_curve"]


def test_missing_column_is_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("horizon,error_direct,error_iter\n0,0.0,0.0\n1,0.1,0.1\n")
    spec = FigureSpec(
        layout="error-analysis", inputs=[{"path": str(bad), "label": "x"}],
        overlays={"bound": True},
    )
    with pytest.raises(RenderError, match="bound"):
        render(spec, tmp_path / "out")
    assert not (tmp_path / "out").exists() or not list((tmp_path / "out").glob("*.png"))


def test_deterministic_dimensions_and_ranges(cli_outputs, tmp_path):
    spec = FigureSpec(
        layout="forecast-compare",
        inputs=[{"path": str(cli_outputs["l63"]), "label": "L63"}],
        size=(5.0, 4.0), dpi=110,
    )
    r1 = render(spec, tmp_path / "a")
    r2 = render(spec, tmp_path / "b")
    (i1,), (i2,) = r1.values(), r2.values()
    assert i1["xlim"] == i2["xlim"] and i1["ylim"] == i2["ylim"]
    from pathlib import Path

    d1, d2 = png_dims(Path(i1["path"])), png_dims(Path(i2["path"]))
    assert d1 == d2 == (550, 440)


def test_spec_validation_errors(tmp_path):
    with pytest.raises(RenderError, match="layout"):
        FigureSpec(layout="pie-chart", inputs=[{"path": "x.csv"}])
    with pytest.raises(RenderError, match="input"):
        FigureSpec(layout="forecast-compare", inputs=[])
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"layout": "forecast-compare", "inputs": [{"path": "x"}], "junk": 1}))
    with pytest.raises(RenderError, match="junk"):
        FigureSpec.from_json(spec_path)


def test_cli_end_to_end(cli_outputs, tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(
        json.dumps(
            {
                "layout": "error-analysis",
                "inputs": [{"path": str(cli_outputs["l63"]), "label": "L63"}],
                "overlays": {"slope": 0.009056, "bound": True},
            }
        )
    )
    rc = render_main(["--spec", str(spec_path), "--out", str(tmp_path / "figs")])
    assert rc == 0
    assert len(list((tmp_path / "figs").glob("*.png"))) == 2
    rc_bad = render_main(["--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")])
    assert rc_bad == 1


def test_load_curves_parses_empty_cells(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("horizon,error_direct,error_iter,autocorr,bound\n0,0.0,0.0,1.0,0.0\n1,,0.5,0.9,0.3\n")
    curves = load_curves(p, ("horizon", "error_iter"))
    assert curves["error_iter"][1] == 0.5
    import math

    assert math.isnan(curves["error_direct"][1])
