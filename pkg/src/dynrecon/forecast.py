"""Direct and iterative forecasting with the reconstructed system.

The reconstructed dynamics acts on pairs (u, y): u estimates the next
measurement through the fitted feedback, y carries the embedded state
through the embedding mechanism g,

    u_{n+1} = w_hat(y_n),    y_{n+1} = g(u_n, y_n),

initialized on the truth as z_0 = (measurement at the origin, embedded
state at the origin).  Iterative error compares the u-track against the
true measured series; direct error evaluates one independently fitted
model per horizon at the origin's embedded state.  The autocorrelation
of the observed signal yields the closed-form upper bound on the direct
error that holds when the measurement lies in the hypothesis space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import DelayEmbedder, EmbeddedSeries, ReservoirEmbedder
from .learning import FeedbackModel

__all__ = [
    "ReconstructedMap",
    "ErrorCurve",
    "AutocorrelationCurve",
    "lift",
    "iterate_reconstructed",
    "error_iterative",
    "error_direct",
    "autocorrelation",
    "direct_bound",
    "plateau_after_growth",
    "growth_rate",
    "unitarity_deviation",
]

Embedder = DelayEmbedder | ReservoirEmbedder

#: Divergence cap: ensemble RMS stays finite when iterates blow up.
CAP_FACTOR = 1e3


@dataclass
class ReconstructedMap:
    """Feedback model + embedding mechanism + initial lift z0 = (u0, y0)."""

    model: FeedbackModel
    embedder: Embedder
    u0: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        if self.y0.shape[-1] != self.embedder.L or self.u0.shape[-1] != self.model.output_dim:
            raise ValueError("initial lift dimensions do not match the embedder/model")


def lift(
    model: FeedbackModel,
    embedder: Embedder,
    phi_series: EmbeddedSeries,
    measured: np.ndarray,
    origin: int,
) -> ReconstructedMap:
    """Initial condition for the reconstructed map at a trajectory index."""
    measured = np.asarray(measured, dtype=float)
    if measured.ndim == 1:
        measured = measured[:, None]
    return ReconstructedMap(
        model=model, embedder=embedder, u0=measured[origin], y0=phi_series.at(origin)
    )


def iterate_reconstructed(
    rec: ReconstructedMap, n: int
) -> tuple[np.ndarray, np.ndarray, int | None]:
    """Iterate the reconstructed map n steps from its initial lift.

    Returns (U, Y, diverged_at): U[k], Y[k] hold the state after k
    steps (index 0 is the initial lift).  If a non-finite state appears,
    iteration stops and the first bad horizon is reported; remaining
    entries are NaN.  Reservoir iterates are not guaranteed stable.
    """
    d = rec.u0.shape[-1]
    U = np.full((n + 1, d), np.nan)
    Y = np.full((n + 1, rec.embedder.L), np.nan)
    U[0], Y[0] = rec.u0, rec.y0
    u, y = rec.u0, rec.y0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n + 1):
            u_next = rec.model.predict(y)
            y_next = rec.embedder.g(u, y)
            if not (np.all(np.isfinite(u_next)) and np.all(np.isfinite(y_next))):
                return U, Y, k
            U[k], Y[k] = u_next, y_next
            u, y = u_next, y_next
    return U, Y, None


@dataclass
class ErrorCurve:
    """Per-horizon RMS forecast error over an ensemble of initial states."""

    horizons: np.ndarray
    values: np.ndarray
    mode: str  # "direct" | "iterative"
    ensemble: int
    diverged: int = 0
    bound: np.ndarray | None = None

    def value_at(self, horizon: int) -> float:
        idx = np.searchsorted(self.horizons, horizon)
        if idx >= len(self.horizons) or self.horizons[idx] != horizon:
            raise KeyError(f"horizon {horizon} not in curve")
        return float(self.values[idx])


def _batched_g(embedder: Embedder, U: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return embedder.g(U, Y)


def error_iterative(
    model: FeedbackModel,
    embedder: Embedder,
    phi_series: EmbeddedSeries,
    measured: np.ndarray,
    origins: np.ndarray,
    n_max: int,
) -> ErrorCurve:
    """RMS iterative forecast error over held-out initial conditions.

    All ensemble members are advanced together (the per-member maps are
    independent); members that diverge contribute the capped value
    CAP_FACTOR * signal scale from their divergence horizon on and are
    counted in ``diverged``.  Horizon 0 is exactly 0 because the initial
    lift uses the true measurement.
    """
    measured = np.asarray(measured, dtype=float)
    if measured.ndim == 1:
        measured = measured[:, None]
    origins = np.asarray(origins, dtype=int)
    if origins.max() + n_max >= measured.shape[0]:
        raise ValueError("truth trajectory too short for requested horizons")
    scale = float(np.sqrt(np.mean(np.sum(measured**2, axis=1))))
    cap = CAP_FACTOR * scale
    B = origins.shape[0]
    U = measured[origins]
    Y = np.stack([phi_series.at(o) for o in origins])
    alive = np.ones(B, dtype=bool)
    sq = np.zeros((n_max + 1, B))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_max + 1):
            U_next = model.predict(Y)
            Y_next = _batched_g(embedder, U, Y)
            bad = ~(
                np.all(np.isfinite(U_next), axis=1) & np.all(np.isfinite(Y_next), axis=1)
            )
            just_died = alive & bad
            if np.any(just_died):
                U_next[just_died] = 0.0
                Y_next[just_died] = 0.0
                alive &= ~bad
            U, Y = U_next, Y_next
            truth = measured[origins + k]
            err = np.linalg.norm(truth - U, axis=1)
            err[~alive] = cap
            sq[k] = np.minimum(err, cap) ** 2
    values = np.sqrt(sq.mean(axis=1))
    values[0] = 0.0
    return ErrorCurve(
        horizons=np.arange(n_max + 1),
        values=values,
        mode="iterative",
        ensemble=B,
        diverged=int(B - alive.sum()),
    )


def error_direct(
    models: dict[int, FeedbackModel],
    phi_series: EmbeddedSeries,
    measured: np.ndarray,
    origins: np.ndarray,
) -> ErrorCurve:
    """RMS direct forecast error: one fitted model per horizon,
    evaluated at the origins' embedded states."""
    measured = np.asarray(measured, dtype=float)
    if measured.ndim == 1:
        measured = measured[:, None]
    origins = np.asarray(origins, dtype=int)
    horizons = np.array(sorted(models))
    if origins.max() + horizons.max() >= measured.shape[0]:
        raise ValueError("truth trajectory too short for requested horizons")
    Y0 = np.stack([phi_series.at(o) for o in origins])
    values = np.empty(horizons.shape[0])
    for i, k in enumerate(horizons):
        pred = models[k].predict(Y0)
        err = np.linalg.norm(measured[origins + k] - pred, axis=1)
        values[i] = float(np.sqrt(np.mean(err**2)))
    return ErrorCurve(
        horizons=horizons, values=values, mode="direct", ensemble=origins.shape[0]
    )


@dataclass
class AutocorrelationCurve:
    """Normalized autocorrelation of an observable along the orbit."""

    lags: np.ndarray
    values: np.ndarray

    def value_at(self, lag: int) -> float:
        return float(self.values[lag])


def autocorrelation(series: np.ndarray, n_max: int) -> AutocorrelationCurve:
    """Time-average estimate of <U^n psi, psi> / ||psi||^2 for lags 0..n_max.

    The series must already be mean-removed (normalized).  Per-lag means
    are used (unbiased in the window length), so the lag-0 value is
    exactly 1.
    """
    psi = np.asarray(series, dtype=float)
    if psi.ndim == 1:
        psi = psi[:, None]
    n = psi.shape[0]
    if n < 2 * n_max:
        raise ValueError(f"series of length {n} too short for {n_max} lags (need 2*n_max)")
    denom = float(np.mean(np.sum(psi**2, axis=1)))
    values = np.empty(n_max + 1)
    for lag in range(n_max + 1):
        prod = np.einsum("td,td->", psi[lag:], psi[: n - lag]) / (n - lag)
        values[lag] = prod / denom
    return AutocorrelationCurve(lags=np.arange(n_max + 1), values=values)


def direct_bound(
    curve: AutocorrelationCurve, phi_norm: float, phi_in_space: bool = True
) -> tuple[np.ndarray, bool]:
    """Per-lag bound ||phi|| * sqrt(1 - AutCor(n)^2) on the direct error.

    Valid when the measurement lies in the hypothesis space; otherwise
    the bound is still reported but flagged invalid (fluctuations above
    it are then expected).
    """
    vals = np.clip(curve.values, -1.0, 1.0)
    return phi_norm * np.sqrt(1.0 - vals**2), bool(phi_in_space)


def plateau_after_growth(curve: ErrorCurve, threshold: float = 1.0) -> float:
    """Mean error over horizons past the growth phase.

    The phase boundary is the first horizon whose error exceeds
    ``threshold``; NaN when the curve never gets there.
    """
    above = np.nonzero(curve.values > threshold)[0]
    if above.size == 0:
        return float("nan")
    return float(np.mean(curve.values[above[0] :]))


def growth_rate(curve: ErrorCurve, plateau: float | None = None) -> tuple[float, float]:
    """(slope, offset) of an OLS fit to log error over the growth window.

    Window: horizon 1 up to the first horizon exceeding half the
    plateau (the whole curve when no plateau is supplied or reached).
    """
    vals = np.clip(curve.values, 1e-300, None)
    hi = len(vals) - 1
    if plateau is not None and np.isfinite(plateau):
        above = np.nonzero(vals > 0.5 * plateau)[0]
        above = above[above >= 1]
        if above.size:
            hi = int(above[0])
    ks = np.arange(1, hi + 1)
    if ks.size < 2:
        return float("nan"), float("nan")
    logs = np.log(vals[1 : hi + 1])
    slope, offset = np.polyfit(ks, logs, 1)
    return float(slope), float(offset)


def envelope_offset(
    curve: ErrorCurve, slope: float, plateau: float | None = None
) -> tuple[float, bool]:
    """Smallest offset whose line log err <= offset + slope * n dominates
    the growth window, and whether that same line dominates the whole
    curve out to n_max (a late spike above the exponential envelope is
    the one way a bounded curve can break the growth law).
    """
    vals = np.clip(curve.values, 1e-300, None)
    hi = len(vals) - 1
    if plateau is not None and np.isfinite(plateau):
        above = np.nonzero(vals > 0.5 * plateau)[0]
        above = above[above >= 1]
        if above.size:
            hi = int(above[0])
    ks = np.arange(1, hi + 1)
    logs = np.log(vals[1 : hi + 1])
    offset = float(np.max(logs - slope * ks))
    all_ks = np.arange(1, len(vals))
    dominated = bool(np.all(np.log(vals[1:]) <= offset + slope * all_ks + 1e-12))
    return offset, dominated


def unitarity_deviation(series: np.ndarray, n_max: int) -> np.ndarray:
    """|RMS(psi o f^n) - RMS(psi)| / RMS(psi) for n = 0..n_max.

    Along a long stationary orbit the shift changes only the sample
    window, so the deviation stays at boundary-term size; this is the
    empirical face of the Koopman operator's unitarity.
    """
    psi = np.asarray(series, dtype=float)
    if psi.ndim == 1:
        psi = psi[:, None]
    base = float(np.sqrt(np.mean(np.sum(psi**2, axis=1))))
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        shifted = float(np.sqrt(np.mean(np.sum(psi[n:] ** 2, axis=1))))
        out[n] = abs(shifted - base) / base
    return out
