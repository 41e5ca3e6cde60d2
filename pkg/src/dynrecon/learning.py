"""Feedback-function estimation over finite hypothesis spaces.

The feedback function maps an embedded state to a future measurement.
It is estimated by (optionally ridge-regularized) least squares over a
finite feature basis that always contains the constant function.  The
root-mean-square training residual is the empirical projection error
``delta``; the sampled maximum of the fitted map's derivative norm is
the overfitting proxy reported alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lstsq
from scipy.spatial.distance import cdist

from .embedding import EmbeddedSeries

__all__ = [
    "HypothesisSpace",
    "AffineSpace",
    "FourierSpace",
    "GaussianKernelSpace",
    "FeedbackModel",
    "TradeoffScan",
    "FitError",
    "fit_feedback",
    "fit_feedback_multi",
    "predict",
    "tradeoff_scan",
]


class FitError(ValueError):
    """Ill-posed or under-determined least-squares fit."""


class HypothesisSpace:
    """Base: a finite feature basis h_1..h_m including the constant."""

    kind = "abstract"
    n_features: int
    input_dim: int

    def features(self, Y: np.ndarray) -> np.ndarray:
        """Feature matrix for states Y of shape (N, L) (or a single state)."""
        raise NotImplementedError

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        """(m, L) Jacobian of the feature vector at a single state."""
        raise NotImplementedError

    def _as_batch(self, Y: np.ndarray) -> tuple[np.ndarray, bool]:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            return Y[None, :], True
        return Y, False


@dataclass
class AffineSpace(HypothesisSpace):
    """Constant plus the raw coordinates (linear regression)."""

    input_dim: int
    kind: str = field(default="affine", init=False)

    @property
    def n_features(self) -> int:
        return 1 + self.input_dim

    def features(self, Y):
        Y, single = self._as_batch(Y)
        H = np.column_stack([np.ones(Y.shape[0]), Y])
        return H[0] if single else H

    def jacobian(self, y):
        J = np.zeros((self.n_features, self.input_dim))
        J[1:, :] = np.eye(self.input_dim)
        return J


@dataclass
class FourierSpace(HypothesisSpace):
    """Fourier modes up to a given order on angle-like input coordinates.

    Angle coordinates enter as (cos, sin) pairs of the (normalized)
    input; each pair is de-normalized and decoded by atan2 before the
    harmonics are formed, so the features are smooth functions of the
    input even off the data manifold (they project onto the circle).
    Non-angle coordinates contribute affine features.  Order 1 on a
    trigonometrically measured system therefore reproduces the affine
    span of the window exactly.

    ``pairs`` lists (cos_index, sin_index) column pairs of the input,
    ``passthrough`` the remaining columns used affinely, and ``mean`` /
    ``scale`` the normalization to undo (vectors of the input length).
    """

    input_dim: int
    order: int
    pairs: tuple[tuple[int, int], ...]
    passthrough: tuple[int, ...] = ()
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    kind: str = field(default="trigonometric", init=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("Fourier order must be >= 1")
        if self.mean is None:
            self.mean = np.zeros(self.input_dim)
        if self.scale is None:
            self.scale = np.ones(self.input_dim)
        self.mean = np.asarray(self.mean, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)

    @property
    def n_features(self) -> int:
        return 1 + 2 * self.order * len(self.pairs) + len(self.passthrough)

    def _angles(self, Y: np.ndarray) -> np.ndarray:
        raw = Y / self.scale + self.mean
        cos_idx = [p[0] for p in self.pairs]
        sin_idx = [p[1] for p in self.pairs]
        return np.arctan2(raw[:, sin_idx], raw[:, cos_idx])

    def features(self, Y):
        Y, single = self._as_batch(Y)
        alpha = self._angles(Y)
        cols = [np.ones(Y.shape[0])]
        for m in range(1, self.order + 1):
            cols.append(np.cos(m * alpha))
            cols.append(np.sin(m * alpha))
        cols.append(Y[:, list(self.passthrough)])
        H = np.column_stack([c if c.ndim == 2 else c[:, None] for c in cols])
        return H[0] if single else H

    def jacobian(self, y):
        y = np.asarray(y, dtype=float)
        raw = y / self.scale + self.mean
        J = np.zeros((self.n_features, self.input_dim))
        n_pairs = len(self.pairs)
        alpha = np.empty(n_pairs)
        dalpha = np.zeros((n_pairs, self.input_dim))
        for p, (ci, si) in enumerate(self.pairs):
            c, s = raw[ci], raw[si]
            r2 = c * c + s * s
            alpha[p] = np.arctan2(s, c)
            dalpha[p, ci] = (-s / r2) / self.scale[ci]
            dalpha[p, si] = (c / r2) / self.scale[si]
        row = 1
        for m in range(1, self.order + 1):
            for p in range(n_pairs):
                J[row + p] = -m * np.sin(m * alpha[p]) * dalpha[p]
            row += n_pairs
            for p in range(n_pairs):
                J[row + p] = m * np.cos(m * alpha[p]) * dalpha[p]
            row += n_pairs
        for j, idx in enumerate(self.passthrough):
            J[row + j, idx] = 1.0
        return J


@dataclass
class GaussianKernelSpace(HypothesisSpace):
    """Constant plus Gaussian bumps centered on subsampled training states."""

    centers: np.ndarray
    bandwidth: float
    kind: str = field(default="gaussian-kernel", init=False)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_features(self) -> int:
        return 1 + self.centers.shape[0]

    @classmethod
    def from_training(
        cls,
        states: np.ndarray,
        max_centers: int = 2000,
        bandwidth: float | None = None,
        seed: int = 0,
    ) -> "GaussianKernelSpace":
        """Centers = uniform subsample; bandwidth = median pairwise distance
        of <= 1000 subsampled states (the median heuristic)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        rng = np.random.default_rng(seed)
        n = states.shape[0]
        idx = rng.choice(n, size=min(max_centers, n), replace=False)
        centers = states[np.sort(idx)]
        if bandwidth is None:
            sub = states[np.sort(rng.choice(n, size=min(1000, n), replace=False))]
            dists = cdist(sub, sub)
            bandwidth = float(np.median(dists[np.triu_indices_from(dists, k=1)]))
        return cls(centers=centers, bandwidth=bandwidth)

    def features(self, Y):
        Y, single = self._as_batch(Y)
        sq = cdist(Y, self.centers, "sqeuclidean")
        H = np.column_stack(
            [np.ones(Y.shape[0]), np.exp(-sq / (2.0 * self.bandwidth**2))]
        )
        return H[0] if single else H

    def jacobian(self, y):
        y = np.asarray(y, dtype=float)
        diff = self.centers - y
        h = np.exp(-np.sum(diff**2, axis=1) / (2.0 * self.bandwidth**2))
        J = np.zeros((self.n_features, self.input_dim))
        J[1:, :] = (h[:, None] * diff) / self.bandwidth**2
        return J


@dataclass
class FeedbackModel:
    """Fitted feedback function: coefficients over a hypothesis space.

    ``delta`` is the RMS training residual at horizon ``k``;
    ``deriv_norm`` the maximum (over sampled training points) operator
    norm of the fitted map's Jacobian -- a lower bound of the true
    supremum.
    """

    k: int
    coeffs: np.ndarray  # (n_features, d)
    space: HypothesisSpace
    delta: float
    deriv_norm: float
    ridge: float
    residual_norms: np.ndarray

    @property
    def output_dim(self) -> int:
        return self.coeffs.shape[1]

    def predict(self, y: np.ndarray) -> np.ndarray:
        return self.space.features(y) @ self.coeffs

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        """(d, L) Jacobian of the fitted map at a single state."""
        return self.coeffs.T @ self.space.jacobian(y)


def predict(model: FeedbackModel, y: np.ndarray) -> np.ndarray:
    """Coefficient matrix applied to the feature vector of ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.space.input_dim:
        raise ValueError(
            f"dimension mismatch: model expects R^{model.space.input_dim}, got {y.shape[-1]}"
        )
    return model.predict(y)


def _series_2d(measured: np.ndarray) -> np.ndarray:
    measured = np.asarray(measured, dtype=float)
    return measured[:, None] if measured.ndim == 1 else measured


def _training_pairs(
    embedded: EmbeddedSeries, measured: np.ndarray, k: int, n_pairs: int | None = None
):
    measured = _series_2d(measured)
    available = min(len(embedded), measured.shape[0] - embedded.start - k)
    if n_pairs is not None:
        available = min(available, n_pairs)
    if available < 1:
        raise FitError(f"no training pairs available at horizon {k}")
    X = embedded.y[:available]
    T = measured[embedded.start + k : embedded.start + k + available]
    return X, T


def _default_ridge(gram: np.ndarray) -> float:
    return 1e-8 * float(np.trace(gram)) / gram.shape[0]


def _deriv_norm(space: HypothesisSpace, coeffs: np.ndarray, X: np.ndarray, cap: int = 256) -> float:
    idx = np.linspace(0, X.shape[0] - 1, min(cap, X.shape[0])).astype(int)
    best = 0.0
    for i in idx:
        best = max(best, float(np.linalg.norm(coeffs.T @ space.jacobian(X[i]), 2)))
    return best


def fit_feedback(
    embedded: EmbeddedSeries,
    measured: np.ndarray,
    k: int,
    space: HypothesisSpace,
    ridge: float | str = 0.0,
    max_pairs: int | None = None,
) -> FeedbackModel:
    """Least-squares fit of the horizon-k feedback function.

    Pairs the embedded sample at trajectory index n with the measurement
    at index n + k (``max_pairs`` caps the training window so held-out
    data stays held out).  With ``ridge == 0`` the normal equations must
    have full rank (otherwise a :class:`FitError` instructs the caller
    to regularize); ``ridge='auto'`` uses 1e-8 * tr(Gram) / m.
    """
    if k < 0:
        raise ValueError("horizon k must be >= 0")
    X, T = _training_pairs(embedded, measured, k, max_pairs)
    H = space.features(X)
    n, m = H.shape
    if n < m:
        raise FitError(f"{n} training pairs for {m} features; need at least m")
    if isinstance(ridge, str):
        if ridge != "auto":
            raise ValueError(f"unknown ridge policy {ridge!r}")
        gram = H.T @ H
        ridge_val = _default_ridge(gram)
        coeffs = cho_solve(cho_factor(gram + ridge_val * np.eye(m)), H.T @ T)
    elif ridge == 0.0:
        coeffs, _, rank, _ = lstsq(H, T)
        if rank < m:
            raise FitError(
                f"rank-deficient normal equations (rank {rank} < {m}); set ridge > 0"
            )
        ridge_val = 0.0
    else:
        if ridge < 0:
            raise ValueError("ridge must be >= 0")
        gram = H.T @ H
        ridge_val = float(ridge)
        coeffs = cho_solve(cho_factor(gram + ridge_val * np.eye(m)), H.T @ T)
    resid = T - H @ coeffs
    norms = np.linalg.norm(resid, axis=1)
    delta = float(np.sqrt(np.mean(norms**2)))
    return FeedbackModel(
        k=k,
        coeffs=coeffs,
        space=space,
        delta=delta,
        deriv_norm=_deriv_norm(space, coeffs, X),
        ridge=ridge_val,
        residual_norms=norms,
    )


def fit_feedback_multi(
    embedded: EmbeddedSeries,
    measured: np.ndarray,
    horizons: list[int],
    space: HypothesisSpace,
    ridge: float | str = "auto",
    max_pairs: int | None = None,
    compute_deriv_norm: bool = False,
    compute_delta: bool = True,
) -> dict[int, FeedbackModel]:
    """One model per horizon over a fixed training window.

    All horizons share the same feature rows (the window is truncated to
    what the largest horizon allows), so the Gram matrix is formed and
    factorized once.  This is the cost-dominant step of direct
    forecasting; sharing the factorization makes hundreds of horizons
    practical.
    """
    kmax = max(horizons)
    X, _ = _training_pairs(embedded, measured, kmax, max_pairs)
    n_pairs = X.shape[0]
    H = space.features(X)
    n, m = H.shape
    if n < m:
        raise FitError(f"{n} training pairs for {m} features; need at least m")
    gram = H.T @ H
    ridge_val = _default_ridge(gram) if isinstance(ridge, str) else float(ridge)
    if ridge_val < 0:
        raise ValueError("ridge must be >= 0")
    factor = cho_factor(gram + ridge_val * np.eye(m))
    measured = _series_2d(measured)
    models: dict[int, FeedbackModel] = {}
    for k in horizons:
        T = measured[embedded.start + k : embedded.start + k + n_pairs]
        coeffs = cho_solve(factor, H.T @ T)
        if compute_delta:
            norms = np.linalg.norm(T - H @ coeffs, axis=1)
            delta = float(np.sqrt(np.mean(norms**2)))
        else:
            norms = np.empty(0)
            delta = float("nan")
        models[k] = FeedbackModel(
            k=k,
            coeffs=coeffs,
            space=space,
            delta=delta,
            deriv_norm=_deriv_norm(space, coeffs, X) if compute_deriv_norm else float("nan"),
            ridge=ridge_val,
            residual_norms=norms,
        )
    return models


@dataclass
class TradeoffScan:
    """Projection error vs derivative norm across a model family."""

    labels: list
    deltas: np.ndarray
    deriv_norms: np.ndarray

    @property
    def delta_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.deltas) <= 1e-12 + 1e-9 * self.deltas[:-1]))

    @property
    def deriv_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.deriv_norms) <= 1e-12 + 1e-9 * self.deriv_norms[:-1]))


def tradeoff_scan(
    embedded: EmbeddedSeries,
    measured: np.ndarray,
    k: int,
    spaces: list[HypothesisSpace] | None = None,
    ridges: list[float] | None = None,
    space: HypothesisSpace | None = None,
) -> TradeoffScan:
    """Scan nested hypothesis spaces (at fixed ridge 0) or a ridge grid
    (at fixed space), recording (delta, deriv_norm) per member."""
    labels, deltas, derivs = [], [], []
    if spaces is not None:
        for s in spaces:
            model = fit_feedback(embedded, measured, k, s, ridge=0.0)
            labels.append(getattr(s, "order", s.n_features))
            deltas.append(model.delta)
            derivs.append(model.deriv_norm)
    elif ridges is not None:
        if space is None:
            raise ValueError("ridge scan needs the fixed hypothesis space")
        for r in ridges:
            model = fit_feedback(embedded, measured, k, space, ridge=r)
            labels.append(r)
            deltas.append(model.delta)
            derivs.append(model.deriv_norm)
    else:
        raise ValueError("provide either spaces or ridges")
    return TradeoffScan(labels=labels, deltas=np.asarray(deltas), deriv_norms=np.asarray(derivs))
