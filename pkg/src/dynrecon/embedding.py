"""Embedding mechanisms: delay coordinates and driven reservoirs.

Both paradigms realize a pair (Phi, g): an injective representation Phi
of the hidden state in R^L together with an update map g that advances
the representation from the incoming measurement, so that the embedded
samples and the measurement series evolve consistently with the hidden
dynamics.

For forecasting, the per-index samples of Phi must be *strictly causal*:
the sample attached to time n may depend only on measurements before n.
Driven reservoir states have this property by construction.  For delay
windows, :func:`delay_embed` produces the conventional window ending at
the current index (used for plain embedding tasks), while
``DelayEmbedder.phi_samples`` shifts by one so the sample at index n is
the window over indices n-1 .. n-Q -- the alignment under which
``y_{n+1} = g(u_n, y_n)`` holds exactly along a trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals

__all__ = [
    "EmbeddedSeries",
    "DelayEmbedder",
    "ReservoirEmbedder",
    "delay_embed",
    "delay_g",
    "reservoir_init",
    "reservoir_g",
    "reservoir_drive",
]


@dataclass
class EmbeddedSeries:
    """Embedded states aligned with trajectory indices.

    ``y[i]`` is the embedded state attached to trajectory index
    ``start + i``; ``start`` counts the leading (washout) indices that
    have no embedded state.
    """

    y: np.ndarray
    start: int

    def __len__(self) -> int:
        return self.y.shape[0]

    def index_of(self, trajectory_index: int) -> int:
        i = trajectory_index - self.start
        if i < 0 or i >= len(self):
            raise IndexError(f"no embedded state at trajectory index {trajectory_index}")
        return i

    def at(self, trajectory_index: int) -> np.ndarray:
        return self.y[self.index_of(trajectory_index)]


def delay_embed(measured: np.ndarray, q: int) -> EmbeddedSeries:
    """Delay windows (newest block first): y_n = (m_n, m_{n-1}, ..., m_{n-q+1}).

    Defined for n >= q-1, so ``start`` (washout) is q-1.
    """
    m = np.asarray(measured, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    n, d = m.shape
    if n < q:
        raise ValueError(f"series of length {n} is too short for {q} delays")
    blocks = [m[q - 1 - j : n - j] for j in range(q)]
    return EmbeddedSeries(y=np.concatenate(blocks, axis=1), start=q - 1)


def delay_g(u: np.ndarray, y: np.ndarray, d: int | None = None) -> np.ndarray:
    """Insert ``u`` as the newest block of ``y``, dropping the oldest.

    A linear map: delay_g(a*u + b*u', a*y + b*y') = a*delay_g(u, y) + b*delay_g(u', y').
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.asarray(y, dtype=float)
    d = u.shape[-1] if d is None else d
    if y.shape[-1] % d != 0:
        raise ValueError(f"window length {y.shape[-1]} is not a multiple of block size {d}")
    return np.concatenate([u, y[..., : y.shape[-1] - d]], axis=-1)


@dataclass(frozen=True)
class DelayEmbedder:
    """Delay-coordinate realization of (Phi, g) with Q blocks of size d."""

    q: int
    d: int

    @property
    def L(self) -> int:
        return self.q * self.d

    def g(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        return delay_g(u, y, self.d)

    def embed(self, measured: np.ndarray) -> EmbeddedSeries:
        """Conventional windows ending at the current index (start = q-1)."""
        return delay_embed(measured, self.q)

    def phi_samples(self, measured: np.ndarray) -> EmbeddedSeries:
        """Strictly causal samples: index n holds the window over n-1 .. n-q.

        With this alignment the update y_{n+1} = g(measured[n], y_n)
        holds exactly, which is what iterated forecasts and the cocycle
        bundle require.
        """
        inner = delay_embed(measured, self.q)
        return EmbeddedSeries(y=inner.y, start=inner.start + 1)

    def g_jacobians(self) -> tuple[np.ndarray, np.ndarray]:
        """(d(g)/du, d(g)/dy): constant injector and block down-shift."""
        L, d = self.L, self.d
        g1 = np.zeros((L, d))
        g1[:d, :] = np.eye(d)
        g2 = np.zeros((L, L))
        if self.q > 1:
            g2[d:, : L - d] = np.eye(L - d)
        return g1, g2


def reservoir_init(L: int, d: int, contraction: float, seed: int) -> "ReservoirEmbedder":
    """Seeded dense Gaussian reservoir, rescaled to operator norm ``contraction``.

    Input matrix B has uniform[-1, 1] entries rescaled to unit column
    norms.  Identical seeds reproduce identical matrices.
    """
    if not 0.0 < contraction < 1.0:
        raise ValueError("contraction factor must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((L, L))
    w *= contraction / svdvals(w)[0]
    b = rng.uniform(-1.0, 1.0, size=(L, d))
    b /= np.linalg.norm(b, axis=0, keepdims=True)
    return ReservoirEmbedder(w_res=w, b=b, contraction=contraction, seed=seed)


def reservoir_g(emb: "ReservoirEmbedder", u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """tanh(W_res y + B u), componentwise; contraction rate <= emb.contraction."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != emb.L or u.shape[-1] != emb.d:
        raise ValueError(
            f"dimension mismatch: expected u in R^{emb.d}, y in R^{emb.L}, "
            f"got {u.shape[-1]} and {y.shape[-1]}"
        )
    return np.tanh(y @ emb.w_res.T + u @ emb.b.T)


def reservoir_drive(
    emb: "ReservoirEmbedder", measured: np.ndarray, y0: np.ndarray | None = None
) -> EmbeddedSeries:
    """Drive the reservoir with the measured series.

    State recursion: y_{n+1} = g(measured[n], y_n) with y_0 = ``y0``.
    The washout is chosen so contraction^washout <= 1e-10; post-washout
    states are reported as samples of Phi (echo-state property: they no
    longer depend on y0 at that tolerance).
    """
    m = np.asarray(measured, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    n = m.shape[0]
    y = np.zeros(emb.L) if y0 is None else np.asarray(y0, dtype=float)
    washout = emb.washout
    states = np.empty((n, emb.L))
    for i in range(n):
        states[i] = y
        y = np.tanh(emb.w_res @ y + emb.b @ m[i])
    if washout >= n:
        raise ValueError(f"series of length {n} shorter than washout {washout}")
    return EmbeddedSeries(y=states[washout:], start=washout)


@dataclass(frozen=True)
class ReservoirEmbedder:
    """Driven-reservoir realization of (Phi, g).

    ``||W_res||_2 == contraction < 1`` guarantees the state map is a
    contraction in y (tanh has derivative <= 1), hence the echo-state
    property.
    """

    w_res: np.ndarray
    b: np.ndarray
    contraction: float
    seed: int = field(default=0, compare=False)

    @property
    def L(self) -> int:
        return self.w_res.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    @property
    def washout(self) -> int:
        return math.ceil(math.log(1e-10) / math.log(self.contraction))

    def g(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        return reservoir_g(self, u, y)

    def embed(self, measured: np.ndarray) -> EmbeddedSeries:
        return reservoir_drive(self, measured)

    def phi_samples(self, measured: np.ndarray) -> EmbeddedSeries:
        """Driven states are already strictly causal: y_n uses measured[:n]."""
        return reservoir_drive(self, measured)

    def g_jacobians(self, u: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """State-dependent partials diag(1 - tanh^2) @ [B | W_res]."""
        pre = self.w_res @ np.asarray(y, dtype=float) + self.b @ np.asarray(u, dtype=float)
        damp = 1.0 - np.tanh(pre) ** 2
        return damp[:, None] * self.b, damp[:, None] * self.w_res

    def contraction_certificate(
        self, samples: int = 1000, seed: int = 0, scale: float = 2.0
    ) -> dict:
        """Sampled bounds on ||dg/dy|| and ||dg/du|| (echo-state certificate).

        The analytic bounds are contraction (for y) and ||B||_2 (for u);
        the max column norm of B (1 by construction) bounds each input
        channel separately.
        """
        rng = np.random.default_rng(seed)
        sup_y = 0.0
        sup_u = 0.0
        for _ in range(samples):
            u = rng.uniform(-scale, scale, self.d)
            y = rng.uniform(-1.0, 1.0, self.L)
            g1, g2 = self.g_jacobians(u, y)
            sup_y = max(sup_y, float(np.linalg.norm(g2, 2)))
            sup_u = max(sup_u, float(np.linalg.norm(g1, 2)))
        return {
            "sup_dg_dy": sup_y,
            "sup_dg_du": sup_u,
            "bound_dg_dy": self.contraction,
            "bound_dg_du": float(np.linalg.norm(self.b, 2)),
            "max_column_norm_b": float(np.max(np.linalg.norm(self.b, axis=0))),
        }
