"""Reference dynamical systems, measurements, and trajectory generation.

Three discrete-time systems are provided:

* ``torus-rotation`` -- quasiperiodic rotation on the 2-torus,
  theta_{n+1} = theta_n + rho (mod 2*pi).
* ``lorenz63`` -- the time-dt map of the Lorenz-63 vector field,
  integrated with a fixed-step 4th-order Runge-Kutta method.
* ``l63rot`` -- Cartesian product of Lorenz-63 with a harmonic
  oscillator (an angle advancing by a fixed increment per step).

Each system exposes a one-step map and its exact Jacobian (analytic for
the rotation, variational Runge-Kutta for the Lorenz family).  A
``MeasurementMap`` turns state sequences into observed series and holds
the normalization (componentwise mean removal plus a single scale that
gives the vector signal unit root-mean-square norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SystemSpec",
    "MeasurementMap",
    "Trajectory",
    "IntegrationError",
    "golden_rotation",
    "step_torus",
    "step_lorenz63",
    "step_l63rot",
    "step",
    "jacobian",
    "variational_step",
    "generate_trajectory",
]

TWO_PI = 2.0 * math.pi

#: Canonical chaotic Lorenz-63 parameters.
LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0

#: Default spin-up (steps discarded before the trajectory is recorded).
DEFAULT_SPINUP = {"torus-rotation": 0, "lorenz63": 10_000, "l63rot": 10_000}


class IntegrationError(RuntimeError):
    """Raised when the fixed-step integrator produces non-finite values."""


def golden_rotation() -> tuple[float, float]:
    """Rotation vector (1, 2*pi/golden mod 2*pi): badly approximable ratio."""
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    return (1.0, (TWO_PI / golden) % TWO_PI)


@dataclass(frozen=True)
class SystemSpec:
    """Parameters of a reference system.

    ``rho`` is the per-step rotation: a pair for ``torus-rotation`` and a
    scalar (angle increment) for ``l63rot``.  ``dt`` and ``substeps``
    control the fixed-step integrator for the Lorenz family.  ``custom``
    systems supply their own step/jacobian closures.
    """

    kind: str = "lorenz63"
    rho: tuple[float, ...] | float = field(default_factory=golden_rotation)
    sigma: float = LORENZ_SIGMA
    rho_lorenz: float = LORENZ_RHO
    beta: float = LORENZ_BETA
    dt: float = 0.01
    substeps: int = 1
    step_fn: Callable | None = None
    jacobian_fn: Callable | None = None
    custom_dim: int = 0

    def __post_init__(self):
        if self.kind not in ("torus-rotation", "lorenz63", "l63rot", "custom"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.kind == "custom" and self.step_fn is None:
            raise ValueError("custom system needs a step_fn")

    @property
    def dim(self) -> int:
        return {"torus-rotation": 2, "lorenz63": 3, "l63rot": 4}.get(
            self.kind, self.custom_dim
        )


def step_torus(theta: np.ndarray, rho: Sequence[float]) -> np.ndarray:
    """One rotation step; result reduced to [0, 2*pi) componentwise."""
    return np.mod(np.asarray(theta, dtype=float) + np.asarray(rho, dtype=float), TWO_PI)


def _l63_rhs(x: float, y: float, z: float, sigma: float, rho: float, beta: float):
    return sigma * (y - x), x * (rho - z) - y, x * y - beta * z


def _l63_rk4_scalar(x, y, z, sigma, rho, beta, h, substeps):
    """Pure-float RK4; the scalar path keeps long orbit generation cheap."""
    for _ in range(substeps):
        k1x, k1y, k1z = _l63_rhs(x, y, z, sigma, rho, beta)
        k2x, k2y, k2z = _l63_rhs(
            x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z, sigma, rho, beta
        )
        k3x, k3y, k3z = _l63_rhs(
            x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z, sigma, rho, beta
        )
        k4x, k4y, k4z = _l63_rhs(
            x + h * k3x, y + h * k3y, z + h * k3z, sigma, rho, beta
        )
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return x, y, z


def step_lorenz63(state: np.ndarray, spec: SystemSpec) -> np.ndarray:
    """Time-dt map of the Lorenz-63 field, fixed-step RK4 with substeps."""
    x, y, z = (float(v) for v in state)
    h = spec.dt / spec.substeps
    x, y, z = _l63_rk4_scalar(
        x, y, z, spec.sigma, spec.rho_lorenz, spec.beta, h, spec.substeps
    )
    out = np.array([x, y, z])
    if not np.all(np.isfinite(out)):
        raise IntegrationError("Lorenz-63 integrator produced non-finite state")
    return out


def step_l63rot(state: np.ndarray, spec: SystemSpec) -> np.ndarray:
    """Angle advances by rho mod 2*pi; the Lorenz block advances by RK4."""
    theta = (float(state[0]) + float(spec.rho)) % TWO_PI
    lz = step_lorenz63(np.asarray(state[1:], dtype=float), spec)
    return np.concatenate(([theta], lz))


def step(spec: SystemSpec, state: np.ndarray) -> np.ndarray:
    """Dispatch the one-step map of ``spec``."""
    if spec.kind == "torus-rotation":
        return step_torus(state, spec.rho)
    if spec.kind == "lorenz63":
        return step_lorenz63(state, spec)
    if spec.kind == "l63rot":
        return step_l63rot(state, spec)
    return np.asarray(spec.step_fn(np.asarray(state, dtype=float)), dtype=float)


def _l63_jac(x: float, y: float, z: float, sigma: float, rho: float, beta: float):
    return np.array(
        [
            [-sigma, sigma, 0.0],
            [rho - z, -1.0, -x],
            [y, x, -beta],
        ]
    )


def _l63_variational_step(state: np.ndarray, U: np.ndarray, spec: SystemSpec):
    """RK4 on the coupled system (state, tangent matrix).

    The tangent part is the exact derivative of the discrete RK4 map, so
    the returned matrix is the Jacobian of ``step_lorenz63`` up to
    floating-point roundoff.
    """
    sigma, rho, beta = spec.sigma, spec.rho_lorenz, spec.beta
    h = spec.dt / spec.substeps
    s = np.asarray(state, dtype=float)
    for _ in range(spec.substeps):
        k1 = np.array(_l63_rhs(*s, sigma, rho, beta))
        K1 = _l63_jac(*s, sigma, rho, beta) @ U
        s2 = s + 0.5 * h * k1
        k2 = np.array(_l63_rhs(*s2, sigma, rho, beta))
        K2 = _l63_jac(*s2, sigma, rho, beta) @ (U + 0.5 * h * K1)
        s3 = s + 0.5 * h * k2
        k3 = np.array(_l63_rhs(*s3, sigma, rho, beta))
        K3 = _l63_jac(*s3, sigma, rho, beta) @ (U + 0.5 * h * K2)
        s4 = s + h * k3
        k4 = np.array(_l63_rhs(*s4, sigma, rho, beta))
        K4 = _l63_jac(*s4, sigma, rho, beta) @ (U + h * K3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        U = U + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    return s, U


def variational_step(
    spec: SystemSpec, state: np.ndarray, U: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Advance (state, tangent frame U) one step: returns (f(state), Df(state) @ U).

    For the Lorenz family the tangent frame is propagated through the
    Runge-Kutta stages, so the product is exact for the discrete map
    (no separate Jacobian assembly); for the rotation the tangent is
    unchanged.
    """
    U = np.asarray(U, dtype=float)
    if spec.kind == "torus-rotation":
        return step_torus(state, spec.rho), U.copy()
    if spec.kind == "lorenz63":
        return _l63_variational_step(state, U, spec)
    if spec.kind == "l63rot":
        s_l, U_l = _l63_variational_step(np.asarray(state[1:], dtype=float), U[1:], spec)
        theta = (float(state[0]) + float(spec.rho)) % TWO_PI
        out = np.vstack([U[0], U_l])
        return np.concatenate(([theta], s_l)), out
    return step(spec, state), jacobian(spec, state) @ U


def jacobian(spec: SystemSpec, state: np.ndarray) -> np.ndarray:
    """Jacobian of the one-step map at ``state``.

    Identity for the torus rotation (an isometry), variational RK4 for
    the Lorenz family, block-diagonal [1] + Lorenz block for l63rot.
    """
    if spec.kind == "torus-rotation":
        return np.eye(2)
    if spec.kind == "lorenz63":
        _, U = _l63_variational_step(state, np.eye(3), spec)
        return U
    if spec.kind == "l63rot":
        _, U = _l63_variational_step(np.asarray(state[1:], dtype=float), np.eye(3), spec)
        J = np.zeros((4, 4))
        J[0, 0] = 1.0
        J[1:, 1:] = U
        return J
    if spec.jacobian_fn is None:
        raise ValueError("custom system has no jacobian_fn")
    return np.asarray(spec.jacobian_fn(np.asarray(state, dtype=float)), dtype=float)


@dataclass
class MeasurementMap:
    """Observation of the state, plus fitted normalization.

    Kinds:

    * ``full-state`` -- identity on the state vector.
    * ``coordinate-projection`` -- selected state coordinates.
    * ``linear-combination`` -- rows of ``weights`` applied to the state.
    * ``trigonometric`` -- (cos, sin) of each angle coordinate in
      ``angle_indices``, followed by the coordinates in
      ``passthrough_indices`` verbatim.  The natural smooth measurement
      for angle-valued systems.

    After :meth:`fit_normalization` the map emits the normalized series:
    componentwise mean removed, then one common scale such that the
    empirical root-mean-square of the measured vector norm is 1.
    """

    kind: str = "full-state"
    indices: tuple[int, ...] = ()
    weights: np.ndarray | None = None
    angle_indices: tuple[int, ...] = ()
    passthrough_indices: tuple[int, ...] = ()
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        valid = ("full-state", "coordinate-projection", "linear-combination", "trigonometric")
        if self.kind not in valid:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.kind == "coordinate-projection" and not self.indices:
            raise ValueError("coordinate-projection needs indices")
        if self.kind == "linear-combination" and self.weights is None:
            raise ValueError("linear-combination needs weights")
        if self.kind == "trigonometric" and not self.angle_indices:
            raise ValueError("trigonometric needs angle_indices")

    def output_dim(self, state_dim: int) -> int:
        if self.kind == "full-state":
            return state_dim
        if self.kind == "coordinate-projection":
            return len(self.indices)
        if self.kind == "linear-combination":
            return self.weights.shape[0]
        return 2 * len(self.angle_indices) + len(self.passthrough_indices)

    def angle_pair_slices(self) -> list[tuple[int, int]]:
        """(cos, sin) column pairs of the measured vector, for Fourier features."""
        if self.kind != "trigonometric":
            return []
        return [(2 * i, 2 * i + 1) for i in range(len(self.angle_indices))]

    def raw(self, states: np.ndarray) -> np.ndarray:
        """Measurement before normalization; states is (N, m) or (m,)."""
        s = np.atleast_2d(np.asarray(states, dtype=float))
        if self.kind == "full-state":
            out = s.copy()
        elif self.kind == "coordinate-projection":
            out = s[:, list(self.indices)]
        elif self.kind == "linear-combination":
            out = s @ self.weights.T
        else:
            cols = []
            for i in self.angle_indices:
                cols.append(np.cos(s[:, i]))
                cols.append(np.sin(s[:, i]))
            for i in self.passthrough_indices:
                cols.append(s[:, i])
            out = np.column_stack(cols)
        return out if np.ndim(states) == 2 else out[0]

    def fit_normalization(self, states: np.ndarray) -> "MeasurementMap":
        """Fit mean/scale on a training trajectory's states; returns self."""
        raw = self.raw(np.atleast_2d(states))
        mean = raw.mean(axis=0)
        centered = raw - mean
        rms = math.sqrt(float(np.mean(np.sum(centered**2, axis=1))))
        if rms == 0.0:
            raise ValueError("degenerate (constant) measurement; cannot normalize")
        self.mean = mean
        self.scale = np.full(raw.shape[1], 1.0 / rms)
        return self

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def normalize(self, values: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise ValueError("normalization not fitted")
        return (np.asarray(values, dtype=float) - self.mean) * self.scale

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise ValueError("normalization not fitted")
        return np.asarray(values, dtype=float) / self.scale + self.mean

    def __call__(self, states: np.ndarray) -> np.ndarray:
        """Measure states; normalized when the normalization is fitted."""
        raw = self.raw(states)
        if self.fitted:
            return (raw - self.mean) * self.scale
        return raw

    def state_jacobian(self, state: np.ndarray) -> np.ndarray:
        """(d, m) Jacobian of the (normalized) measurement at a state."""
        state = np.asarray(state, dtype=float)
        m = state.shape[0]
        if self.kind == "full-state":
            J = np.eye(m)
        elif self.kind == "coordinate-projection":
            J = np.zeros((len(self.indices), m))
            for r, i in enumerate(self.indices):
                J[r, i] = 1.0
        elif self.kind == "linear-combination":
            J = self.weights.copy()
        else:
            J = np.zeros((self.output_dim(m), m))
            r = 0
            for i in self.angle_indices:
                J[r, i] = -math.sin(state[i])
                J[r + 1, i] = math.cos(state[i])
                r += 2
            for i in self.passthrough_indices:
                J[r, i] = 1.0
                r += 1
        if self.fitted:
            J = self.scale[:, None] * J
        return J


@dataclass
class Trajectory:
    """A sampled orbit and its measured series.

    ``states[n + 1] == step(system, states[n])`` exactly (integrator
    determinism), and ``measured[n] == measurement(states[n])``.
    """

    states: np.ndarray
    measured: np.ndarray
    system: SystemSpec
    measurement: MeasurementMap

    def __len__(self) -> int:
        return self.states.shape[0]


def _orbit(spec: SystemSpec, w0: np.ndarray, n: int) -> np.ndarray:
    """n states starting at w0 (inclusive)."""
    if spec.kind == "lorenz63":
        out = np.empty((n, 3))
        x, y, z = (float(v) for v in w0)
        h = spec.dt / spec.substeps
        for i in range(n):
            out[i, 0], out[i, 1], out[i, 2] = x, y, z
            x, y, z = _l63_rk4_scalar(
                x, y, z, spec.sigma, spec.rho_lorenz, spec.beta, h, spec.substeps
            )
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise IntegrationError("Lorenz-63 integrator produced non-finite state")
        return out
    if spec.kind == "l63rot":
        out = np.empty((n, 4))
        theta = float(w0[0]) % TWO_PI
        x, y, z = (float(v) for v in w0[1:])
        h = spec.dt / spec.substeps
        rho = float(spec.rho)
        for i in range(n):
            out[i] = (theta, x, y, z)
            theta = (theta + rho) % TWO_PI
            x, y, z = _l63_rk4_scalar(
                x, y, z, spec.sigma, spec.rho_lorenz, spec.beta, h, spec.substeps
            )
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise IntegrationError("Lorenz-63 integrator produced non-finite state")
        return out
    if spec.kind == "torus-rotation":
        # sequential so states[i+1] == step(spec, states[i]) bitwise
        out = np.empty((n, 2))
        t1, t2 = (float(w0[0]) % TWO_PI, float(w0[1]) % TWO_PI)
        r1, r2 = (float(v) for v in spec.rho)
        for i in range(n):
            out[i, 0], out[i, 1] = t1, t2
            t1 = (t1 + r1) % TWO_PI
            t2 = (t2 + r2) % TWO_PI
        return out
    out = np.empty((n, spec.dim))
    s = np.asarray(w0, dtype=float)
    for i in range(n):
        out[i] = s
        s = step(spec, s)
    return out


def generate_trajectory(
    spec: SystemSpec,
    w0: np.ndarray,
    n: int,
    measurement: MeasurementMap,
    spinup: int | None = None,
) -> Trajectory:
    """Generate an orbit of ``n`` states with its measured series.

    ``spinup`` steps are discarded first so the retained orbit samples
    the invariant measure's support (defaults: 1e4 for the Lorenz
    family, 0 for the torus).  The measurement is applied as-is: fit its
    normalization beforehand (on this trajectory's states, typically) if
    a normalized series is wanted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w0 = np.asarray(w0, dtype=float)
    if not np.all(np.isfinite(w0)):
        raise ValueError("initial state must be finite")
    if spinup is None:
        spinup = DEFAULT_SPINUP.get(spec.kind, 0)
    if spinup > 0:
        start = _orbit(spec, w0, spinup + 1)[-1]
    else:
        start = w0
    states = _orbit(spec, start, n)
    return Trajectory(states=states, measured=measurement(states), system=spec, measurement=measurement)
