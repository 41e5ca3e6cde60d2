"""Figure rendering for forecast error tables.

Rendering never touches the input files; every panel is written as its
own PNG with deterministic dimensions for a fixed spec.  A referenced
column that is missing from a file is a hard error naming the column --
panels are never silently dropped.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

LAYOUTS = ("forecast-compare", "torus-vs-mixed", "error-analysis")

#: columns each layout reads from every input file
REQUIRED_COLUMNS = {
    "forecast-compare": ("horizon", "error_direct", "error_iter"),
    "torus-vs-mixed": ("horizon", "error_direct", "error_iter"),
    "error-analysis": ("horizon", "error_direct", "error_iter", "bound"),
}

SQRT2 = math.sqrt(2.0)


class RenderError(ValueError):
    """Bad figure spec or unusable input table."""


def load_curves(path: str | Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Parse a curve CSV; empty cells become NaN.

    Raises :class:`RenderError` naming the first required column that
    the header does not carry.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise RenderError(f"{path}: empty file")
    header = lines[0].split(",")
    for col in required:
        if col not in header:
            raise RenderError(f"{path}: required column '{col}' missing from header {header}")
    cols: dict[str, list[float]] = {name: [] for name in header}
    for line in lines[1:]:
        if not line.strip():
            continue
        for name, cell in zip(header, line.split(",")):
            cols[name].append(float(cell) if cell != "" else math.nan)
    return {name: np.asarray(vals) for name, vals in cols.items()}


@dataclass
class FigureSpec:
    """What to draw: input tables, layout, scales, and overlays.

    ``overlays`` may carry ``slope`` (per-step exponential rate of the
    dashed theoretical line on iterative panels), ``offset`` (its
    intercept; when omitted, the smallest value keeping the line above
    the measured curve is used), and ``bound`` (draw the dashed
    autocorrelation-bound curve on direct panels).  An empty overlay
    spec draws the curves alone.
    """

    layout: str
    inputs: list[dict]
    y_scale: str = "log"
    overlays: dict = field(default_factory=dict)
    size: tuple[float, float] = (6.4, 4.8)
    dpi: int = 100

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise RenderError(f"unknown layout {self.layout!r}; expected one of {LAYOUTS}")
        if self.y_scale not in ("log", "linear"):
            raise RenderError(f"y_scale must be 'log' or 'linear', not {self.y_scale!r}")
        if not self.inputs:
            raise RenderError("spec lists no input files")
        for item in self.inputs:
            if "path" not in item:
                raise RenderError("every input needs a 'path'")

    @classmethod
    def from_json(cls, path: str | Path) -> "FigureSpec":
        with open(path) as fh:
            data = json.load(fh)
        known = {"layout", "inputs", "y_scale", "overlays", "size", "dpi"}
        unknown = set(data) - known
        if unknown:
            raise RenderError(f"unknown spec fields: {sorted(unknown)}")
        if "size" in data:
            data["size"] = tuple(data["size"])
        return cls(**data)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "panel"


def _positive(vals: np.ndarray) -> np.ndarray:
    return np.where(vals > 0, vals, np.nan)


def _min_dominating_offset(horizons: np.ndarray, values: np.ndarray, slope: float) -> float:
    """Smallest intercept whose line log(v) = offset + slope*n stays above
    the measured curve (horizon 0 excluded: its error is identically 0)."""
    mask = (horizons >= 1) & np.isfinite(values) & (values > 0)
    return float(np.max(np.log(values[mask]) - slope * horizons[mask]))


def _new_panel(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=spec.size, dpi=spec.dpi)
    ax.set_yscale(spec.y_scale)
    ax.set_xlabel("forecast horizon n")
    ax.set_ylabel("RMS error")
    return fig, ax


def _save(fig, ax, path: Path, report: dict, key: str, extras: dict) -> None:
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    report[key] = {
        "path": str(path),
        "xlim": list(ax.get_xlim()),
        "ylim": list(ax.get_ylim()),
        **extras,
    }


def render(spec: FigureSpec, out_dir: str | Path) -> dict:
    """Render every panel of the layout; returns a report keyed by panel
    name with file paths, axis ranges, and overlay flags."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {}
    overlays = spec.overlays or {}
    slope = overlays.get("slope")
    offset = overlays.get("offset")
    want_bound = bool(overlays.get("bound", False))

    for idx, item in enumerate(spec.inputs):
        curves = load_curves(item["path"], REQUIRED_COLUMNS[spec.layout])
        label = item.get("label", f"input {idx}")
        slug = f"{idx}_{_slug(label)}"
        n = curves["horizon"]

        if spec.layout in ("forecast-compare", "torus-vs-mixed"):
            fig, ax = _new_panel(spec)
            ax.plot(n, _positive(curves["error_direct"]), label="direct", color="tab:blue")
            ax.plot(n, _positive(curves["error_iter"]), label="iterative", color="tab:red")
            has_refs = spec.layout == "forecast-compare"
            if has_refs:
                ax.axhline(1.0, ls="--", lw=1.0, color="grey", label="1.0")
                ax.axhline(SQRT2, ls="--", lw=1.0, color="black", label="sqrt(2)")
            ax.set_title(label)
            _save(
                fig, ax, out / f"{spec.layout}_{slug}.png", report,
                f"{spec.layout}:{label}", {"reference_lines": has_refs},
            )
            continue

        # error-analysis: iterative panel with the slope line, direct
        # panel with the bound curve
        fig, ax = _new_panel(spec)
        iter_vals = _positive(curves["error_iter"])
        ax.plot(n, iter_vals, label="iterative", color="tab:red")
        slope_drawn = False
        if slope is not None:
            off = (
                float(offset)
                if offset is not None
                else _min_dominating_offset(n, curves["error_iter"], float(slope))
            )
            line = np.exp(off + float(slope) * n)
            ax.plot(n, line, ls="--", color="black", label=f"slope {float(slope):.4g}/step")
            slope_drawn = True
        ax.set_title(f"{label}: iterative error vs growth law")
        _save(
            fig, ax, out / f"error_analysis_iter_{slug}.png", report,
            f"error-analysis-iter:{label}", {"slope_line": slope_drawn},
        )

        fig, ax = _new_panel(spec)
        ax.plot(n, _positive(curves["error_direct"]), label="direct", color="tab:blue")
        bound_drawn = False
        if want_bound:
            ax.plot(n, _positive(curves["bound"]), ls="--", color="black", label="autocorrelation bound")
            bound_drawn = True
        ax.set_title(f"{label}: direct error vs autocorrelation bound")
        _save(
            fig, ax, out / f"error_analysis_direct_{slug}.png", report,
            f"error-analysis-direct:{label}", {"bound_curve": bound_drawn},
        )
    return report
