"""Matrix cocycles: products, Lyapunov spectra, and the reconstruction bundle.

A generator G maps an orbit state to a square matrix; the induced
cocycle is the ordered product along the orbit,

    C(n, w) = G(f^{n-1} w) ... G(w),     C(0, w) = Id,

satisfying C(m+n, w) = C(n, f^m w) C(m, w).  Lyapunov exponents are
estimated with the standard QR (Benettin-style) method: propagate an
orthonormal frame, re-orthonormalize every step, accumulate the log
diagonal of R.

The reconstruction bundle assembles, along a true orbit, the linearized
blocks of the reconstructed map

    M_hat(w) = [[0, W_hat(w)], [G1(w), G2(w)]]

(W_hat the fitted feedback's Jacobian at the embedded state; G1, G2 the
partial Jacobians of the embedding mechanism) together with the
inhomogeneity c(w) = (0, G1(w) r(w^-)) built from the fitted one-step
residual r at the previous orbit index.  Iterating z' = M_hat z + c
from zero tracks the fluctuations of the iterated forecast around the
projected Koopman reference to first order; the M_hat cocycle's top
exponent measures the stability of the reconstruction against the
original system's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh, qr

from .embedding import DelayEmbedder, EmbeddedSeries, ReservoirEmbedder
from .forecast import ReconstructedMap, iterate_reconstructed
from .learning import FeedbackModel
from .systems import MeasurementMap, SystemSpec, jacobian, variational_step

__all__ = [
    "DegenerateCocycleError",
    "LyapunovEstimate",
    "CocycleBundle",
    "FluctuationSeries",
    "StabilityReport",
    "cocycle_product",
    "lyapunov_spectrum",
    "lyapunov_spectrum_system",
    "build_bundle",
    "perturbed_iterate",
    "fluctuations",
    "stability_gap",
    "sensitivity_constant",
]

Generator = Callable[[np.ndarray], np.ndarray]


class DegenerateCocycleError(RuntimeError):
    """QR frame collapsed (zero diagonal): numerically singular cocycle."""


def cocycle_product(gen: Generator, orbit: np.ndarray, n: int, j: int = 0) -> np.ndarray:
    """Product G(orbit[j+n-1]) ... G(orbit[j]); n = 0 gives the identity."""
    orbit = np.atleast_2d(np.asarray(orbit, dtype=float))
    if j + n > orbit.shape[0]:
        raise ValueError("orbit too short for requested product")
    if n == 0:
        dim = np.asarray(gen(orbit[j if j < orbit.shape[0] else 0])).shape[0]
        return np.eye(dim)
    out = np.asarray(gen(orbit[j]), dtype=float)
    for i in range(j + 1, j + n):
        out = np.asarray(gen(orbit[i]), dtype=float) @ out
    return out


@dataclass
class LyapunovEstimate:
    """Ordered Lyapunov exponents with their convergence trace."""

    per_step: np.ndarray  # descending
    per_time: np.ndarray  # per_step / dt
    n_steps: int
    dt: float
    trace_steps: np.ndarray
    trace: np.ndarray  # (len(trace_steps), p) running per-step estimates

    @property
    def top(self) -> float:
        return float(self.per_time[0])


def _qr_run(
    advance: Callable[[int, np.ndarray], np.ndarray],
    dim: int,
    p: int,
    n_steps: int,
    dt: float,
) -> LyapunovEstimate:
    """Shared QR loop; ``advance(i, Q)`` must return G_i @ Q."""
    if p > dim:
        raise ValueError(f"cannot estimate {p} exponents in dimension {dim}")
    Q = np.eye(dim, p)
    logs = np.zeros(p)
    every = max(1, n_steps // 100)
    trace_steps, trace = [], []
    for i in range(n_steps):
        A = advance(i, Q)
        Q, R = qr(A, mode="economic")
        diag = np.diag(R)
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            raise DegenerateCocycleError(f"zero/non-finite QR diagonal at step {i}")
        signs = np.sign(diag)
        Q = Q * signs
        logs += np.log(np.abs(diag))
        if (i + 1) % every == 0 or i == n_steps - 1:
            trace_steps.append(i + 1)
            trace.append(logs / (i + 1))
    order = np.argsort(logs)[::-1]
    per_step = logs[order] / n_steps
    return LyapunovEstimate(
        per_step=per_step,
        per_time=per_step / dt,
        n_steps=n_steps,
        dt=dt,
        trace_steps=np.asarray(trace_steps),
        trace=np.asarray(trace)[:, order],
    )


def lyapunov_spectrum(
    gen: Generator, orbit: np.ndarray, n_steps: int, p: int, dt: float = 1.0
) -> LyapunovEstimate:
    """QR estimate of the top p exponents of the cocycle generated along the orbit."""
    orbit = np.atleast_2d(np.asarray(orbit, dtype=float))
    if n_steps > orbit.shape[0]:
        raise ValueError("orbit shorter than requested number of steps")
    dim = np.asarray(gen(orbit[0])).shape[0]

    def advance(i, Q):
        return np.asarray(gen(orbit[i]), dtype=float) @ Q

    return _qr_run(advance, dim, p, n_steps, dt)


def lyapunov_spectrum_system(
    spec: SystemSpec, w0: np.ndarray, n_steps: int, p: int, spinup: int = 0
) -> LyapunovEstimate:
    """Exponents of a reference system's Jacobian cocycle.

    State and tangent frame advance together through the variational
    integrator, so no orbit is stored; dt converts to per-time-unit.
    """
    state = np.asarray(w0, dtype=float)
    for _ in range(spinup):
        state, _ = variational_step(spec, state, np.eye(spec.dim, 1))
    holder = {"state": state}

    def advance(i, Q):
        s_next, GQ = variational_step(spec, holder["state"], Q)
        holder["state"] = s_next
        return GQ

    return _qr_run(advance, spec.dim, p, n_steps, spec.dt)


class CocycleBundle:
    """Linearization blocks of the reconstructed map along a true orbit.

    Index i of the bundle refers to trajectory index ``origin + i``.
    ``m_hat(i)`` assembles [[0, W_hat], [G1, G2]] at that state (the
    zero block is d x d); ``c(i)`` is (0_d, G1(i) r_{i-1}) with r the
    fitted one-step residual along the orbit and r_{-1} = 0, matching
    the zero initialization of the perturbed cocycle.
    """

    def __init__(
        self,
        model: FeedbackModel,
        embedder: DelayEmbedder | ReservoirEmbedder,
        phi_states: np.ndarray,
        u_states: np.ndarray,
        residuals: np.ndarray,
        origin: int,
        w_true: np.ndarray | None = None,
    ):
        self.model = model
        self.embedder = embedder
        self.phi_states = phi_states
        self.u_states = u_states
        self.residuals = residuals
        self.origin = origin
        self.d = u_states.shape[1]
        self.L = embedder.L
        self._delay = isinstance(embedder, DelayEmbedder)
        if self._delay:
            self._g1_const, self._g2_const = embedder.g_jacobians()
        self._w_true = w_true
        n = phi_states.shape[0]
        self._w_hat = np.empty((n, self.d, self.L))
        for i in range(n):
            self._w_hat[i] = model.jacobian(phi_states[i])

    def __len__(self) -> int:
        return self.phi_states.shape[0]

    @property
    def has_true_feedback(self) -> bool:
        return self._w_true is not None

    def w_hat(self, i: int) -> np.ndarray:
        return self._w_hat[i]

    def g1(self, i: int) -> np.ndarray:
        if self._delay:
            return self._g1_const
        return self.embedder.g_jacobians(self.u_states[i], self.phi_states[i])[0]

    def g2(self, i: int) -> np.ndarray:
        if self._delay:
            return self._g2_const
        return self.embedder.g_jacobians(self.u_states[i], self.phi_states[i])[1]

    def _assemble(self, W: np.ndarray, i: int) -> np.ndarray:
        d, L = self.d, self.L
        M = np.zeros((d + L, d + L))
        M[:d, d:] = W
        M[d:, :d] = self.g1(i)
        M[d:, d:] = self.g2(i)
        return M

    def m_hat(self, i: int) -> np.ndarray:
        return self._assemble(self._w_hat[i], i)

    def m_true(self, i: int) -> np.ndarray:
        if self._w_true is None:
            raise ValueError("no true feedback Jacobian available for this bundle")
        w = self._w_true if self._w_true.ndim == 2 else self._w_true[i]
        return self._assemble(w, i)

    def c(self, i: int) -> np.ndarray:
        out = np.zeros(self.d + self.L)
        if i >= 1:
            out[self.d :] = self.g1(i) @ self.residuals[i - 1]
        return out


def build_bundle(
    model: FeedbackModel,
    embedder: DelayEmbedder | ReservoirEmbedder,
    phi_series: EmbeddedSeries,
    measured: np.ndarray,
    origin: int,
    n_steps: int,
    w_true: np.ndarray | None = None,
) -> CocycleBundle:
    """Assemble the bundle along trajectory indices origin .. origin+n_steps.

    ``measured`` is the normalized measured series of the true orbit;
    ``phi_series`` its embedded samples.  ``w_true`` (constant matrix or
    per-step array), when a closed form exists, enables the limiting
    cocycle; otherwise only the fitted M_hat is available.
    """
    measured = np.asarray(measured, dtype=float)
    if measured.ndim == 1:
        measured = measured[:, None]
    if origin + n_steps + 1 >= measured.shape[0] + 1:
        raise ValueError("measured series too short for requested bundle")
    n = n_steps + 1
    phi_states = np.stack([phi_series.at(origin + i) for i in range(n)])
    u_states = measured[origin : origin + n]
    preds = model.predict(phi_states[: n - 1])
    residuals = np.zeros((n, u_states.shape[1]))
    residuals[: n - 1] = measured[origin + 1 : origin + n] - preds
    return CocycleBundle(
        model=model,
        embedder=embedder,
        phi_states=phi_states,
        u_states=u_states,
        residuals=residuals,
        origin=origin,
        w_true=w_true,
    )


def perturbed_iterate(
    bundle: CocycleBundle, n_max: int
) -> tuple[np.ndarray, np.ndarray, int | None]:
    """Iterate z' = M_hat z + c from z = 0.

    Returns (a, b, diverged_at) with a of shape (n_max+1, d) and b of
    shape (n_max+1, L); a[1] = 0 and b[0] = 0 hold by construction.
    Overflow is flagged with the divergence horizon.
    """
    if n_max >= len(bundle):
        raise ValueError("bundle does not cover n_max steps")
    d, L = bundle.d, bundle.L
    a = np.full((n_max + 1, d), np.nan)
    b = np.full((n_max + 1, L), np.nan)
    z = np.zeros(d + L)
    a[0], b[0] = 0.0, 0.0
    for n in range(n_max):
        z = bundle.m_hat(n) @ z + bundle.c(n)
        if not np.all(np.isfinite(z)):
            return a, b, n + 1
        a[n + 1], b[n + 1] = z[:d], z[d:]
    return a, b, None


@dataclass
class FluctuationSeries:
    """Forecast fluctuations around the projected Koopman reference,
    next to the perturbed-cocycle companion (a_n, b_n)."""

    du: np.ndarray  # (n+1, d)
    dy: np.ndarray  # (n+1, L)
    a: np.ndarray
    b: np.ndarray
    diverged_at: int | None = None

    def ratio(self, n: int, floor: float = 1e-13) -> float:
        """||du_n|| / ||a_n||; 1.0 when both vanish (the n = 1 case)."""
        nu, na = float(np.linalg.norm(self.du[n])), float(np.linalg.norm(self.a[n]))
        if nu < floor and na < floor:
            return 1.0
        if na < floor:
            return float("inf")
        return nu / na


def fluctuations(
    rec: ReconstructedMap,
    bundle: CocycleBundle,
    phi_series: EmbeddedSeries,
    measured: np.ndarray,
    origin: int,
    n_max: int,
) -> FluctuationSeries:
    """Fluctuations of the iterated forecast from the truth-projected reference.

    Reference at step n >= 1: first block = the fitted feedback applied
    to the true embedded state at n-1 (the projected one-step Koopman
    image, carried by the unitary evolution), second block = the true
    embedded state at n.  The companion (a_n, b_n) comes from the
    perturbed cocycle over the same window.
    """
    measured = np.asarray(measured, dtype=float)
    if measured.ndim == 1:
        measured = measured[:, None]
    U, Y, diverged = iterate_reconstructed(rec, n_max)
    du = np.zeros_like(U)
    dy = np.zeros_like(Y)
    for n in range(n_max + 1):
        if diverged is not None and n >= diverged:
            du[n:] = np.nan
            dy[n:] = np.nan
            break
        if n >= 1:
            ref_u = rec.model.predict(phi_series.at(origin + n - 1))
            du[n] = ref_u - U[n]
        dy[n] = phi_series.at(origin + n) - Y[n]
    a, b, div_ab = perturbed_iterate(bundle, n_max)
    if diverged is None:
        diverged = div_ab
    return FluctuationSeries(du=du, dy=dy, a=a, b=b, diverged_at=diverged)


@dataclass
class StabilityReport:
    """Top exponents of the reconstructed and original cocycles (per time unit)."""

    recon: LyapunovEstimate
    system: LyapunovEstimate
    gap: float
    containment_distances: np.ndarray

    @property
    def contained(self) -> bool:
        return bool(np.all(self.containment_distances <= 0.05))


def stability_gap(
    bundle: CocycleBundle,
    spec: SystemSpec,
    states: np.ndarray,
    n_steps: int,
    p_recon: int | None = None,
    p_system: int | None = None,
) -> StabilityReport:
    """Compare the M_hat cocycle's spectrum with the system's.

    ``states`` are the true orbit states aligned with the bundle's
    origin.  The gap is top(recon) - top(system) per time unit; the
    containment distances report, for every system exponent, the
    distance to the nearest reconstructed exponent.
    """
    if n_steps >= len(bundle):
        raise ValueError("bundle does not cover n_steps")
    p_sys = p_system or spec.dim
    p_rec = p_recon or min(bundle.d + bundle.L, max(2 * p_sys, p_sys + 2))
    recon = _bundle_spectrum(bundle, n_steps, p_rec, spec.dt)
    system = lyapunov_spectrum(
        lambda s: jacobian(spec, s), np.asarray(states, dtype=float), n_steps, p_sys, spec.dt
    )
    gap = recon.top - system.top
    dists = np.array(
        [np.min(np.abs(recon.per_time - lam)) for lam in system.per_time]
    )
    return StabilityReport(recon=recon, system=system, gap=gap, containment_distances=dists)


def _bundle_spectrum(bundle: CocycleBundle, n_steps: int, p: int, dt: float) -> LyapunovEstimate:
    def advance(i, Q):
        return bundle.m_hat(i) @ Q

    return _qr_run(advance, bundle.d + bundle.L, p, n_steps, dt)


def sensitivity_constant(
    spec: SystemSpec,
    measurement: MeasurementMap,
    q: int,
    states: np.ndarray,
) -> np.ndarray:
    """Per-point sensitivity of the measurement against the delay embedding.

    C(w) = max over nonzero tangent v of ||Dphi(w) v|| / ||DPhi(w) v||,
    computed as the largest generalized singular value of the pair.
    Only systems with an analytically known tangent space are supported
    (the torus rotation, where Df is the identity).
    """
    if spec.kind != "torus-rotation":
        raise ValueError("sensitivity constant requires the torus rotation")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    rho = np.asarray(spec.rho, dtype=float)
    out = np.empty(states.shape[0])
    for n, th in enumerate(states):
        A = measurement.state_jacobian(th)
        blocks = [measurement.state_jacobian(np.mod(th - j * rho, 2 * np.pi)) for j in range(q)]
        B = np.vstack(blocks)
        BtB = B.T @ B
        if np.linalg.matrix_rank(BtB) < BtB.shape[0]:
            raise ValueError("rank-deficient embedding derivative")
        vals = eigh(A.T @ A, BtB, eigvals_only=True)
        out[n] = float(np.sqrt(max(vals)))
    return out
