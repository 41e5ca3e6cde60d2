"""Experiment pipelines: forecast error curves, Lyapunov spectra,
Markov/Ulam builds, and the invariant check suite.

Everything here is deterministic given the configuration: seeds flow
from the config into trajectory start points, reservoir wiring, and
kernel center subsampling; a config therefore fully determines a run.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import cocycle as cc
from . import embedding as emb
from . import forecast as fc
from . import learning as ln
from . import markov as mk
from . import systems as sy

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "ForecastResult",
    "LyapunovResult",
    "MarkovResult",
    "CheckResult",
    "forecast_experiment",
    "lyapunov_experiment",
    "markov_experiment",
    "checks_suite",
]

SYSTEM_NAMES = {"torus": "torus-rotation", "l63": "lorenz63", "l63rot": "l63rot"}


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field name."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"config field '{field_name}': {message}")


@dataclass
class ExperimentConfig:
    """Flat, versioned experiment configuration (JSON-serializable)."""

    version: int = 1
    seed: int = 0
    system: str = "torus"
    dt: float = 0.01
    substeps: int = 1
    rho: tuple[float, ...] | float | None = None
    spinup: int | None = None
    measurement: str = "auto"
    embedding: str = "delay"
    q: int = 5
    reservoir_size: int = 200
    contraction: float = 0.9
    hypothesis: str = "auto"
    fourier_order: int = 1
    max_centers: int = 1500
    bandwidth: float | None = None
    ridge: float | str = "auto"
    train_n: int = 10_000
    gap: int = 100
    n_max: int = 500
    ensemble: int = 200
    spacing: int = 11
    lyap_n: int = 200_000
    lyap_p: int | None = None
    with_model: bool = False
    markov_resolution: int = 20
    markov_build_n: int = 100_000
    markov_independent_n: int = 100_000
    markov_observable: str = "auto"
    checks_orbit_n: int = 200_000
    unitarity_n: int = 100

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.version != 1:
            raise ConfigError("version", f"unsupported version {self.version}")
        if self.system not in SYSTEM_NAMES and self.system not in SYSTEM_NAMES.values():
            raise ConfigError("system", f"unknown system {self.system!r}")
        if self.embedding not in ("delay", "reservoir"):
            raise ConfigError("embedding", f"unknown embedding {self.embedding!r}")
        for name in ("substeps", "q", "reservoir_size", "train_n", "n_max",
                     "ensemble", "spacing", "lyap_n", "markov_build_n",
                     "markov_independent_n", "checks_orbit_n", "unitarity_n"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt", "must be positive")
        if not 0.0 < self.contraction < 1.0:
            raise ConfigError("contraction", "must lie in (0, 1)")
        if self.markov_resolution < 2:
            raise ConfigError("markov_resolution", "must be >= 2")
        if self.gap < 0:
            raise ConfigError("gap", "must be >= 0")
        if self.fourier_order < 1:
            raise ConfigError("fourier_order", "must be >= 1")
        if isinstance(self.ridge, str) and self.ridge != "auto":
            raise ConfigError("ridge", "must be a number >= 0 or 'auto'")
        if not isinstance(self.ridge, str) and self.ridge < 0:
            raise ConfigError("ridge", "must be >= 0")
        if self.hypothesis not in ("auto", "fourier", "affine", "gaussian-kernel"):
            raise ConfigError("hypothesis", f"unknown hypothesis {self.hypothesis!r}")
        if self.measurement not in ("auto", "full-state", "trigonometric"):
            raise ConfigError("measurement", f"unknown measurement {self.measurement!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["rho"], tuple):
            d["rho"] = list(d["rho"])
        return d

    @property
    def system_kind(self) -> str:
        return SYSTEM_NAMES.get(self.system, self.system)


def default_config(system: str = "torus", embedding: str = "delay") -> dict:
    """Per-system tuned defaults mirroring the reference experiments."""
    base = {"system": system, "embedding": embedding, "seed": 0}
    if system == "torus":
        # delayed Fourier features are linearly dependent along a pure
        # rotation orbit, so the fit needs the tiny automatic ridge;
        # dt = 1: the rotation is a map, one step is one time unit
        base.update(hypothesis="fourier", q=5, n_max=500, ridge="auto", dt=1.0)
    elif system == "l63":
        base.update(hypothesis="gaussian-kernel", q=7, n_max=1000, ridge="auto")
    elif system == "l63rot":
        base.update(hypothesis="gaussian-kernel", q=7, n_max=1000, ridge="auto")
    if embedding == "reservoir":
        base.update(hypothesis="affine", ridge="auto")
    return base


def build_system(cfg: ExperimentConfig) -> sy.SystemSpec:
    kind = cfg.system_kind
    if cfg.rho is not None:
        rho = tuple(cfg.rho) if isinstance(cfg.rho, (tuple, list)) else float(cfg.rho)
    elif kind == "l63rot":
        rho = 0.1
    else:
        rho = sy.golden_rotation()
    return sy.SystemSpec(kind=kind, rho=rho, dt=cfg.dt, substeps=cfg.substeps)


def build_measurement(cfg: ExperimentConfig, spec: sy.SystemSpec) -> sy.MeasurementMap:
    choice = cfg.measurement
    if choice == "auto":
        choice = "trigonometric" if spec.kind in ("torus-rotation", "l63rot") else "full-state"
    if choice == "full-state":
        return sy.MeasurementMap(kind="full-state")
    if spec.kind == "torus-rotation":
        return sy.MeasurementMap(kind="trigonometric", angle_indices=(0, 1))
    if spec.kind == "l63rot":
        return sy.MeasurementMap(
            kind="trigonometric", angle_indices=(0,), passthrough_indices=(1, 2, 3)
        )
    raise ConfigError("measurement", f"trigonometric measurement needs an angle system, not {spec.kind}")


def build_embedder(cfg: ExperimentConfig, d: int):
    if cfg.embedding == "delay":
        return emb.DelayEmbedder(q=cfg.q, d=d)
    return emb.reservoir_init(cfg.reservoir_size, d, cfg.contraction, seed=cfg.seed + 7)


def build_space(
    cfg: ExperimentConfig,
    embedder,
    measurement: sy.MeasurementMap,
    train_windows: np.ndarray,
) -> ln.HypothesisSpace:
    choice = cfg.hypothesis
    if choice == "auto":
        if cfg.embedding == "reservoir":
            choice = "affine"
        elif measurement.kind == "trigonometric" and not measurement.passthrough_indices:
            choice = "fourier"
        else:
            choice = "gaussian-kernel"
    L = embedder.L
    if choice == "affine":
        return ln.AffineSpace(input_dim=L)
    if choice == "gaussian-kernel":
        return ln.GaussianKernelSpace.from_training(
            train_windows, max_centers=cfg.max_centers,
            bandwidth=cfg.bandwidth, seed=cfg.seed + 13,
        )
    if cfg.embedding != "delay":
        raise ConfigError("hypothesis", "fourier features need the delay embedding")
    pairs_block = measurement.angle_pair_slices()
    if not pairs_block:
        raise ConfigError("hypothesis", "fourier features need a trigonometric measurement")
    d = embedder.d
    pairs, passthrough = [], []
    for b in range(embedder.q):
        pairs.extend((b * d + c, b * d + s) for c, s in pairs_block)
        n_angles = 2 * len(pairs_block)
        passthrough.extend(b * d + n_angles + j for j in range(d - n_angles))
    return ln.FourierSpace(
        input_dim=L,
        order=cfg.fourier_order,
        pairs=tuple(pairs),
        passthrough=tuple(passthrough),
        mean=np.tile(measurement.mean, embedder.q),
        scale=np.tile(measurement.scale, embedder.q),
    )


@dataclass
class ForecastResult:
    config: ExperimentConfig
    direct: fc.ErrorCurve
    iterative: fc.ErrorCurve
    autocorr: fc.AutocorrelationCurve
    bound: np.ndarray
    bound_valid: bool
    deltas: np.ndarray  # per horizon 1..n_max (NaN where skipped)
    summary: dict
    wall_seconds: float = 0.0


def _initial_state(cfg: ExperimentConfig, spec: sy.SystemSpec) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    if spec.kind == "torus-rotation":
        return rng.uniform(0.0, 2.0 * math.pi, size=2)
    if spec.kind == "lorenz63":
        return np.array([1.0, 1.0, 1.05]) + 0.1 * rng.standard_normal(3)
    return np.concatenate(
        [[rng.uniform(0.0, 2.0 * math.pi)], np.array([1.0, 1.0, 1.05]) + 0.1 * rng.standard_normal(3)]
    )


def forecast_experiment(cfg: ExperimentConfig) -> ForecastResult:
    """Full forecast pipeline: generate, normalize, embed, fit, evaluate.

    Training uses only the first ``train_n`` indices; test origins live
    past a gap in the tail of the same long orbit, ``spacing`` steps
    apart, and the ensemble RMS over them estimates the L2(mu) error.
    """
    t0 = time.perf_counter()
    spec = build_system(cfg)
    measurement = build_measurement(cfg, spec)
    total_n = cfg.train_n + cfg.gap + (cfg.ensemble - 1) * cfg.spacing + cfg.n_max + 2
    traj = sy.generate_trajectory(spec, _initial_state(cfg, spec), total_n, measurement, cfg.spinup)
    measurement.fit_normalization(traj.states[: cfg.train_n])
    measured = measurement(traj.states)

    embedder = build_embedder(cfg, measured.shape[1])
    phi = embedder.phi_samples(measured)
    train_sample_count = cfg.train_n - phi.start
    if train_sample_count < 10:
        raise ConfigError("train_n", "training window shorter than the embedding washout")
    space = build_space(cfg, embedder, measurement, phi.y[:train_sample_count])

    model = ln.fit_feedback(
        phi, measured, 1, space, ridge=cfg.ridge, max_pairs=train_sample_count - 1
    )
    horizons = list(range(1, cfg.n_max + 1))
    heavy = space.n_features >= 500 and len(horizons) > 200
    models = ln.fit_feedback_multi(
        phi,
        measured,
        horizons,
        space,
        ridge=cfg.ridge if cfg.ridge != 0.0 else "auto",
        max_pairs=train_sample_count - cfg.n_max,
        compute_delta=not heavy,
    )

    origins = cfg.train_n + cfg.gap + cfg.spacing * np.arange(cfg.ensemble)
    direct = fc.error_direct(models, phi, measured, origins)
    iterative = fc.error_iterative(model, embedder, phi, measured, origins, cfg.n_max)

    train_series = measured[: cfg.train_n]
    autocorr = fc.autocorrelation(train_series, cfg.n_max)
    phi_norm = float(np.sqrt(np.mean(np.sum(train_series**2, axis=1))))
    bound_valid = (
        space.kind == "trigonometric"
        and measurement.kind == "trigonometric"
        and spec.kind == "torus-rotation"
    )
    bound, _ = fc.direct_bound(autocorr, phi_norm, bound_valid)
    deltas = np.array([models[k].delta for k in horizons])

    plateau_iter = fc.plateau_after_growth(iterative, threshold=1.0)
    slope, offset = fc.growth_rate(iterative, plateau_iter)
    delta_ref = float(np.nanmax(deltas)) if np.any(np.isfinite(deltas)) else model.delta
    viol = int(
        np.sum(direct.values > bound[direct.horizons] + 3.0 * delta_ref)
    )
    summary = {
        "system": cfg.system,
        "embedding": cfg.embedding,
        "hypothesis": space.kind,
        "delta_1": model.delta,
        "deriv_norm_1": model.deriv_norm,
        "delta_max": delta_ref,
        "phi_norm": phi_norm,
        "plateau_direct": float(direct.values[-1]),
        "plateau_iter": plateau_iter,
        "growth_slope": slope,
        "growth_offset": offset,
        "diverged": iterative.diverged,
        "bound_valid": bound_valid,
        "bound_violations": viol,
        "ensemble": cfg.ensemble,
        "n_max": cfg.n_max,
    }
    return ForecastResult(
        config=cfg,
        direct=direct,
        iterative=iterative,
        autocorr=autocorr,
        bound=bound,
        bound_valid=bound_valid,
        deltas=deltas,
        summary=summary,
        wall_seconds=time.perf_counter() - t0,
    )


@dataclass
class LyapunovResult:
    config: ExperimentConfig
    estimate: cc.LyapunovEstimate
    stability: cc.StabilityReport | None
    summary: dict
    wall_seconds: float = 0.0


def lyapunov_experiment(cfg: ExperimentConfig) -> LyapunovResult:
    """QR-method exponent estimates; optional stability-gap report
    against a fitted reconstruction (delay paradigm)."""
    t0 = time.perf_counter()
    spec = build_system(cfg)
    p = cfg.lyap_p or spec.dim
    spinup = cfg.spinup if cfg.spinup is not None else sy.DEFAULT_SPINUP[spec.kind]
    est = cc.lyapunov_spectrum_system(
        spec, _initial_state(cfg, spec), cfg.lyap_n, p, spinup=spinup
    )
    stability = None
    if cfg.with_model:
        measurement = build_measurement(cfg, spec)
        n_total = cfg.train_n + 5
        traj = sy.generate_trajectory(spec, _initial_state(cfg, spec), n_total, measurement, cfg.spinup)
        measurement.fit_normalization(traj.states[: cfg.train_n])
        measured = measurement(traj.states)
        embedder = build_embedder(cfg, measured.shape[1])
        phi = embedder.phi_samples(measured)
        count = cfg.train_n - phi.start
        space = build_space(cfg, embedder, measurement, phi.y[:count])
        model = ln.fit_feedback(phi, measured, 1, space, ridge=cfg.ridge, max_pairs=count - 1)
        n_steps = min(20_000, count - 2)
        bundle = cc.build_bundle(model, embedder, phi, measured, phi.start, n_steps)
        states = traj.states[phi.start : phi.start + n_steps + 1]
        stability = cc.stability_gap(bundle, spec, states, n_steps)
    summary = {
        "system": cfg.system,
        "exponents_per_time": est.per_time.tolist(),
        "exponents_per_step": est.per_step.tolist(),
        "n_steps": est.n_steps,
        "dt": est.dt,
    }
    if stability is not None:
        summary["stability_gap"] = stability.gap
        summary["recon_exponents_per_time"] = stability.recon.per_time.tolist()
        summary["containment_distances"] = stability.containment_distances.tolist()
    return LyapunovResult(
        config=cfg, estimate=est, stability=stability, summary=summary,
        wall_seconds=time.perf_counter() - t0,
    )


@dataclass
class MarkovResult:
    config: ExperimentConfig
    partition: mk.BoxPartition
    tm: mk.TransitionMatrix
    stationary: mk.StationaryDistribution
    occupation: np.ndarray
    law: tuple[np.ndarray, np.ndarray, np.ndarray]
    summary: dict
    wall_seconds: float = 0.0


def _markov_observable(cfg: ExperimentConfig, spec: sy.SystemSpec, states: np.ndarray) -> np.ndarray:
    choice = cfg.markov_observable
    if choice == "auto":
        choice = "angle" if spec.kind == "torus-rotation" else "z"
    if choice == "angle":
        return states[:, 0:1]
    if choice == "z":
        return states[:, -1:]
    if choice == "full":
        return states
    raise ConfigError("markov_observable", f"unknown observable {choice!r}")


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two probability vectors."""
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def markov_experiment(cfg: ExperimentConfig) -> MarkovResult:
    """Ulam build from one long orbit, checked against an independent one."""
    t0 = time.perf_counter()
    spec = build_system(cfg)
    measurement = sy.MeasurementMap(kind="full-state")
    traj = sy.generate_trajectory(
        spec, _initial_state(cfg, spec), cfg.markov_build_n, measurement, cfg.spinup
    )
    series = _markov_observable(cfg, spec, traj.states)
    circular = (spec.kind == "torus-rotation",) if series.shape[1] == 1 else ()
    partition = mk.build_partition(series, cfg.markov_resolution, circular=circular)
    tm = mk.transition_matrix(series, partition)
    stationary = mk.stationary_distribution(tm)

    rng = np.random.default_rng(cfg.seed + 1)
    if spec.kind == "torus-rotation":
        w0b = rng.uniform(0, 2 * math.pi, 2)
    elif spec.kind == "lorenz63":
        w0b = np.array([-3.0, 2.0, 25.0]) + rng.standard_normal(3)
    else:
        w0b = np.concatenate([[rng.uniform(0, 2 * math.pi)], np.array([-3.0, 2.0, 25.0]) + rng.standard_normal(3)])
    indep = sy.generate_trajectory(spec, w0b, cfg.markov_independent_n, measurement, cfg.spinup)
    indep_series = _markov_observable(cfg, spec, indep.states)
    occ_cells = partition.cell_index(indep_series)
    occupation = np.bincount(occ_cells, minlength=partition.n_cells).astype(float)
    occupation /= occupation.sum()

    law = mk.reconstruct_law(tm, partition)
    col_sums = tm.column_sums()
    built = tm.counts > 0
    uniform = np.zeros(partition.n_cells)
    uniform[partition.occupied] = 1.0 / partition.occupied.size
    summary = {
        "system": cfg.system,
        "resolution": cfg.markov_resolution,
        "n_cells": partition.n_cells,
        "occupied_cells": int(partition.occupied.size),
        "tv_stationary_occupation": tv_distance(stationary.probs, occupation),
        "tv_stationary_uniform": tv_distance(stationary.probs, uniform),
        "stationary_residual": stationary.residual,
        "stationary_method": stationary.method,
        "max_column_sum_error": float(np.max(np.abs(col_sums[built] - 1.0))) if built.any() else 0.0,
        "zero_columns": int(tm.zero_columns.size),
    }
    return MarkovResult(
        config=cfg, partition=partition, tm=tm, stationary=stationary,
        occupation=occupation, law=law, summary=summary,
        wall_seconds=time.perf_counter() - t0,
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: value={self.value:.3e} tol={self.tolerance:.3e} {self.detail}"


def _check_cocycle_law(cfg: ExperimentConfig) -> CheckResult:
    worst = 0.0
    for name in ("torus", "l63", "l63rot"):
        sub = ExperimentConfig(system=name, seed=cfg.seed)
        spec = build_system(sub)
        traj = sy.generate_trajectory(
            spec, _initial_state(sub, spec), 64, sy.MeasurementMap(kind="full-state")
        )
        gen = lambda s, sp=spec: sy.jacobian(sp, s)
        full = {}
        for m in (0, 1, 3, 7, 12, 20):
            for n in (0, 1, 5, 8, 20):
                lhs = full.get(m + n)
                if lhs is None:
                    lhs = cc.cocycle_product(gen, traj.states, m + n)
                    full[m + n] = lhs
                rhs = cc.cocycle_product(gen, traj.states, n, j=m) @ cc.cocycle_product(gen, traj.states, m)
                denom = max(np.linalg.norm(lhs), 1e-300)
                worst = max(worst, float(np.linalg.norm(lhs - rhs) / denom))
    return CheckResult("cocycle_law", worst <= 1e-10, worst, 1e-10, "max rel err over systems, m,n<=20")


def _check_echo_state(cfg: ExperimentConfig) -> CheckResult:
    worst = 0.0
    for name in ("torus", "l63", "l63rot"):
        sub = ExperimentConfig(system=name, seed=cfg.seed)
        spec = build_system(sub)
        measurement = build_measurement(sub, spec)
        n = 1200
        traj = sy.generate_trajectory(spec, _initial_state(sub, spec), n, measurement)
        measurement.fit_normalization(traj.states)
        measured = measurement(traj.states)
        res = emb.reservoir_init(64, measured.shape[1], 0.9, seed=cfg.seed + 3)
        rng = np.random.default_rng(cfg.seed + 4)
        y_a = rng.uniform(-1, 1, res.L)
        y_b = rng.uniform(-1, 1, res.L)
        run_a = emb.reservoir_drive(res, measured, y_a)
        run_b = emb.reservoir_drive(res, measured, y_b)
        worst = max(worst, float(np.max(np.abs(run_a.y - run_b.y))))
    return CheckResult("echo_state", worst <= 1e-8, worst, 1e-8, "post-washout max |diff|, contraction 0.9")


def _check_unitarity(cfg: ExperimentConfig) -> CheckResult:
    spec = build_system(ExperimentConfig(system="l63", seed=cfg.seed))
    measurement = sy.MeasurementMap(kind="coordinate-projection", indices=(2,))
    traj = sy.generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), cfg.checks_orbit_n, measurement)
    measurement.fit_normalization(traj.states)
    series = measurement(traj.states)
    dev = fc.unitarity_deviation(series, cfg.unitarity_n)
    worst = float(np.max(dev))
    return CheckResult("unitarity", worst <= 0.02, worst, 0.02, f"L63 z, orbit {cfg.checks_orbit_n}")


def _check_torus_volume(cfg: ExperimentConfig) -> CheckResult:
    # the rotation preserves volume, so the pushforward of a uniform
    # sample must still follow the uniform occupancy law
    spec = build_system(ExperimentConfig(system="torus", seed=cfg.seed))
    rng = np.random.default_rng(cfg.seed + 5)
    pts = rng.uniform(0, 2 * math.pi, size=(10_000, 2))
    pushed = np.mod(pts + np.asarray(spec.rho), 2 * math.pi)
    edges = np.linspace(0, 2 * math.pi, 11)
    h1, _, _ = np.histogram2d(pushed[:, 0], pushed[:, 1], bins=(edges, edges))
    flat = np.full(100, 1.0 / 100)
    tv = tv_distance(h1.ravel() / h1.sum(), flat)
    return CheckResult("torus_volume_preservation", tv <= 0.05, tv, 0.05, "TV of pushed 10x10 occupancy vs uniform")


def _check_variational(cfg: ExperimentConfig) -> CheckResult:
    worst = 0.0
    h = 1e-5
    for name in ("torus", "l63", "l63rot"):
        sub = ExperimentConfig(system=name, seed=cfg.seed)
        spec = build_system(sub)
        traj = sy.generate_trajectory(
            spec, _initial_state(sub, spec), 100, sy.MeasurementMap(kind="full-state")
        )
        for s in traj.states:
            J = sy.jacobian(spec, s)
            fd = np.empty_like(J)
            for j in range(spec.dim):
                e = np.zeros(spec.dim)
                e[j] = h
                if spec.kind == "torus-rotation":
                    plus = sy.step_torus(s + e, spec.rho)
                    minus = sy.step_torus(s - e, spec.rho)
                    diff = np.angle(np.exp(1j * (plus - minus)))
                else:
                    plus = sy.step(spec, s + e)
                    minus = sy.step(spec, s - e)
                    diff = plus - minus
                    if spec.kind == "l63rot":
                        diff[0] = np.angle(np.exp(1j * (plus[0] - minus[0])))
                fd[:, j] = diff / (2 * h)
            worst = max(worst, float(np.linalg.norm(J - fd) / max(np.linalg.norm(J), 1e-300)))
    return CheckResult("variational_consistency", worst <= 1e-4, worst, 1e-4, "jacobian vs central differences")


def _check_delay_identity(cfg: ExperimentConfig) -> CheckResult:
    rng = np.random.default_rng(cfg.seed + 6)
    series = rng.standard_normal((50, 3))
    d = emb.delay_embed(series, 4)
    worst = 0.0
    for n in range(len(d) - 1):
        nxt = emb.delay_g(series[d.start + n + 1], d.y[n])
        worst = max(worst, float(np.max(np.abs(nxt - d.y[n + 1]))))
    return CheckResult("delay_identity", worst == 0.0, worst, 0.0, "shift-insert reproduces the embedding")


def _check_contraction(cfg: ExperimentConfig) -> CheckResult:
    res = emb.reservoir_init(64, 3, 0.9, seed=cfg.seed + 8)
    cert = res.contraction_certificate(samples=200, seed=cfg.seed + 9)
    ok = cert["sup_dg_dy"] <= cert["bound_dg_dy"] + 1e-12 and cert["sup_dg_du"] <= cert["bound_dg_du"] + 1e-12
    return CheckResult(
        "contraction_certificate", ok, cert["sup_dg_dy"], cert["bound_dg_dy"],
        f"dg/du sup {cert['sup_dg_du']:.3f} <= ||B|| {cert['bound_dg_du']:.3f}",
    )


def _small_torus_fit(seed: int):
    cfg = ExperimentConfig(**default_config("torus"))
    cfg.seed = seed
    cfg.train_n = 2000
    cfg.q = 1  # single delay keeps the Fourier features independent (ridge 0 valid)
    cfg.ridge = 0.0
    cfg.validate()
    spec = build_system(cfg)
    measurement = build_measurement(cfg, spec)
    traj = sy.generate_trajectory(spec, _initial_state(cfg, spec), cfg.train_n + 200, measurement)
    measurement.fit_normalization(traj.states[: cfg.train_n])
    measured = measurement(traj.states)
    embedder = build_embedder(cfg, measured.shape[1])
    phi = embedder.phi_samples(measured)
    count = cfg.train_n - phi.start
    space = build_space(cfg, embedder, measurement, phi.y[:count])
    model = ln.fit_feedback(phi, measured, 1, space, ridge=0.0, max_pairs=count - 1)
    return cfg, spec, measurement, traj, measured, embedder, phi, model


def _check_block_structure(cfg: ExperimentConfig) -> CheckResult:
    _, spec, _, traj, measured, embedder, phi, model = _small_torus_fit(cfg.seed)
    bundle = cc.build_bundle(model, embedder, phi, measured, phi.start, 50)
    worst = 0.0
    for i in (0, 10, 50):
        M = bundle.m_hat(i)
        worst = max(worst, float(np.max(np.abs(M[: bundle.d, : bundle.d]))))
    return CheckResult("block_structure", worst == 0.0, worst, 0.0, "upper-left d x d block is zero")


def _check_projection_orthogonality(cfg: ExperimentConfig) -> CheckResult:
    _, _, _, _, measured, _, phi, model = _small_torus_fit(cfg.seed)
    X = phi.y[: model.residual_norms.shape[0]]
    H = model.space.features(X)
    T = measured[phi.start + 1 : phi.start + 1 + X.shape[0]]
    resid = T - H @ model.coeffs
    scale = float(np.linalg.norm(T))
    worst = float(np.max(np.abs(H.T @ resid))) / max(scale, 1e-300)
    return CheckResult("projection_orthogonality", worst <= 1e-8, worst, 1e-8, "residual vs feature columns, ridge 0")


def _check_markov(cfg: ExperimentConfig) -> CheckResult:
    sub = ExperimentConfig(system="torus", seed=cfg.seed, markov_build_n=20_000,
                           markov_independent_n=20_000, markov_resolution=20)
    res = markov_experiment(sub)
    tv_u = res.summary["tv_stationary_uniform"]
    col_err = res.summary["max_column_sum_error"]
    ok = tv_u <= 0.05 and col_err <= 1e-12
    return CheckResult("markov_stationarity", ok, tv_u, 0.05, f"col-sum err {col_err:.2e}")


def _check_markov_refinement(cfg: ExperimentConfig) -> CheckResult:
    spec = build_system(ExperimentConfig(system="l63", seed=cfg.seed))
    measurement = sy.MeasurementMap(kind="full-state")
    traj = sy.generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 100_000, measurement)
    series = traj.states[:, 2:3]
    tvs = []
    for resolution in (10, 20):
        part = mk.build_partition(series, resolution)
        tm = mk.transition_matrix(series, part)
        cells, halted = mk.simulate_markov(tm, int(part.cell_index(series[:1])[0]), 100_000, cfg.seed + 11)
        freqs = np.bincount(cells, minlength=part.n_cells).astype(float)
        freqs /= freqs.sum()
        occ = np.bincount(part.cell_index(series), minlength=part.n_cells).astype(float)
        occ /= occ.sum()
        tvs.append(tv_distance(freqs, occ))
    growth = tvs[1] - tvs[0]
    return CheckResult("markov_refinement", growth <= 0.02, growth, 0.02,
                       f"TV at res 10: {tvs[0]:.3f}, res 20: {tvs[1]:.3f}")


def _check_determinism(cfg: ExperimentConfig) -> CheckResult:
    spec = build_system(ExperimentConfig(system="l63", seed=cfg.seed))
    m = sy.MeasurementMap(kind="full-state")
    a = sy.generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 500, m)
    b = sy.generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 500, m)
    same = a.states.tobytes() == b.states.tobytes()
    return CheckResult("determinism", same, 0.0 if same else 1.0, 0.0, "bitwise-identical regeneration")


def checks_suite(cfg: ExperimentConfig) -> list[CheckResult]:
    """Run every invariant/property check; order is fixed and deterministic."""
    return [
        _check_cocycle_law(cfg),
        _check_echo_state(cfg),
        _check_unitarity(cfg),
        _check_torus_volume(cfg),
        _check_variational(cfg),
        _check_delay_identity(cfg),
        _check_contraction(cfg),
        _check_block_structure(cfg),
        _check_projection_orthogonality(cfg),
        _check_markov(cfg),
        _check_markov_refinement(cfg),
        _check_determinism(cfg),
    ]
