"""Experiment runner: forecast / lyapunov / markov / checks subcommands.

Each run reads a JSON config (flags override file fields), writes
comma-separated tables plus a JSON summary into the output directory,
and finishes with a manifest listing every output with its checksum.
File writes are atomic (write-temp-then-rename).

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 check-suite failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cocycle import DegenerateCocycleError
from .experiments import (
    CheckResult,
    ConfigError,
    ExperimentConfig,
    checks_suite,
    default_config,
    forecast_experiment,
    lyapunov_experiment,
    markov_experiment,
)
from .learning import FitError
from .systems import IntegrationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_CHECKS = 3


def atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(v) -> str:
    if isinstance(v, float):
        if v != v:  # NaN
            return ""
        return repr(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, cfg: ExperimentConfig, outputs: list[Path], wall: float) -> None:
    manifest = {
        "config": cfg.to_dict(),
        "versions": {
            "dynrecon": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_seconds": wall,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_forecast(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> int:
    res = forecast_experiment(cfg)
    n_max = cfg.n_max
    direct_by_k = dict(zip(res.direct.horizons.tolist(), res.direct.values.tolist()))
    direct_by_k[0] = 0.0
    rows = []
    for k in range(n_max + 1):
        rows.append(
            (
                k,
                direct_by_k.get(k, float("nan")),
                float(res.iterative.values[k]),
                float(res.autocorr.values[k]),
                float(res.bound[k]),
            )
        )
    curve_path = out_dir / "error_curves.csv"
    write_csv(curve_path, ["horizon", "error_direct", "error_iter", "autocorr", "bound"], rows)
    summary_path = out_dir / "summary.json"
    _write_json(summary_path, res.summary)
    write_manifest(out_dir, cfg, [curve_path, summary_path], res.wall_seconds)
    if not quiet:
        s = res.summary
        print(f"forecast[{cfg.system}/{cfg.embedding}] delta1={s['delta_1']:.3e} "
              f"plateau_direct={s['plateau_direct']:.4f} plateau_iter={s['plateau_iter']:.4f} "
              f"growth_slope={s['growth_slope']:.5f} diverged={s['diverged']}")
    return EXIT_OK


def run_lyapunov(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> int:
    res = lyapunov_experiment(cfg)
    est = res.estimate
    p = est.per_step.shape[0]
    header = ["step"] + [f"lambda{i + 1}_running" for i in range(p)]
    rows = []
    for step_i, vals in zip(est.trace_steps, est.trace):
        rows.append((int(step_i), *[float(v) / est.dt for v in vals]))
    curve_path = out_dir / "lyapunov_curve.csv"
    write_csv(curve_path, header, rows)
    summary_path = out_dir / "summary.json"
    _write_json(summary_path, res.summary)
    write_manifest(out_dir, cfg, [curve_path, summary_path], res.wall_seconds)
    if not quiet:
        lams = ", ".join(f"{v:.4f}" for v in est.per_time)
        print(f"lyapunov[{cfg.system}] per-time-unit exponents: [{lams}] over {est.n_steps} steps")
        if res.stability is not None:
            print(f"stability gap: {res.stability.gap:+.4f} per time unit")
    return EXIT_OK


def run_markov(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> int:
    res = markov_experiment(cfg)
    tm_path = out_dir / "transition_matrix.txt"
    from .markov import write_coo

    write_coo(res.tm, tm_path)
    st_path = out_dir / "stationary.csv"
    write_csv(
        st_path,
        ["cell", "probability"],
        [(int(i), float(p)) for i, p in enumerate(res.stationary.probs) if p > 0],
    )
    occ_path = out_dir / "occupation.csv"
    write_csv(
        occ_path,
        ["cell", "frequency"],
        [(int(i), float(p)) for i, p in enumerate(res.occupation) if p > 0],
    )
    cells, images, disp = res.law
    law_path = out_dir / "law.csv"
    dim = images.shape[1]
    header = (
        ["cell"]
        + [f"centroid_{c}" for c in range(dim)]
        + [f"image_{c}" for c in range(dim)]
        + ["dispersion"]
    )
    cents = res.partition.centroids(cells)
    rows = [
        (int(cell), *map(float, cents[i]), *map(float, images[i]), float(disp[i]))
        for i, cell in enumerate(cells)
    ]
    write_csv(law_path, header, rows)
    summary_path = out_dir / "summary.json"
    _write_json(summary_path, res.summary)
    write_manifest(out_dir, cfg, [tm_path, st_path, occ_path, law_path, summary_path], res.wall_seconds)
    if not quiet:
        s = res.summary
        print(f"markov[{cfg.system}] cells={s['occupied_cells']}/{s['n_cells']} "
              f"TV(stationary, occupation)={s['tv_stationary_occupation']:.4f} "
              f"TV(stationary, uniform)={s['tv_stationary_uniform']:.4f}")
    return EXIT_OK


def run_checks(cfg: ExperimentConfig, out_dir: Path, quiet: bool) -> int:
    t0 = time.perf_counter()
    results: list[CheckResult] = checks_suite(cfg)
    rows = [(r.name, int(r.passed), r.value, r.tolerance, r.detail) for r in results]
    path = out_dir / "checks.csv"
    write_csv(path, ["name", "passed", "value", "tolerance", "detail"], rows)
    write_manifest(out_dir, cfg, [path], time.perf_counter() - t0)
    for r in results:
        if not quiet:
            print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
    else:
        data = default_config(args.system or "torus", args.embedding or "delay")
    if args.system:
        data["system"] = args.system
    if args.embedding:
        data["embedding"] = args.embedding
    if args.seed is not None:
        data["seed"] = args.seed
    if isinstance(data.get("rho"), list):
        data["rho"] = tuple(data["rho"])
    return ExperimentConfig.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynrecon",
        description="Dynamical-system reconstruction experiments: forecasting "
        "error laws, Lyapunov spectra, and Markov/Koopman matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("forecast", "direct/iterative error curves with the autocorrelation bound"),
        ("lyapunov", "QR-method Lyapunov exponents (optionally with the stability gap)"),
        ("markov", "Ulam transition matrix, stationary law, and diagnostics"),
        ("checks", "run the invariant/property check suite"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--system", choices=["torus", "l63", "l63rot"], default=None)
        p.add_argument("--embedding", choices=["delay", "reservoir"], default=None)
        p.add_argument("--quiet", action="store_true")
    return parser


RUNNERS = {
    "forecast": run_forecast,
    "lyapunov": run_lyapunov,
    "markov": run_markov,
    "checks": run_checks,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return RUNNERS[args.command](cfg, out_dir, args.quiet)
    except (IntegrationError, DegenerateCocycleError, FitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
