import math

import numpy as np
import pytest

from dynrecon import (
    IntegrationError,
    MeasurementMap,
    SystemSpec,
    generate_trajectory,
    golden_rotation,
    jacobian,
    step,
    step_l63rot,
    step_lorenz63,
    step_torus,
)

TWO_PI = 2 * math.pi


def test_torus_identity_rotation():
    out = step_torus(np.array([0.0, 0.0]), (0.0, 0.0))
    assert np.array_equal(out, [0.0, 0.0])


def test_torus_modular_arithmetic():
    out = step_torus(np.array([6.0, 6.0]), (0.5, 0.5))
    expected = 6.5 - TWO_PI
    assert np.allclose(out, [expected, expected], atol=1e-12)
    assert np.all(out >= 0) and np.all(out < TWO_PI)


def test_torus_equidistribution_gap():
    # brute-force orbit enumeration: a badly approximable rotation fills
    # each circle densely; check the largest empty arc per coordinate
    spec = SystemSpec(kind="torus-rotation", rho=golden_rotation(), dt=1.0)
    traj = generate_trajectory(spec, np.zeros(2), 10_000, MeasurementMap(kind="full-state"))
    for c in range(2):
        vals = np.sort(traj.states[:, c])
        gaps = np.diff(vals)
        wrap = vals[0] + TWO_PI - vals[-1]
        assert max(gaps.max(), wrap) < 0.2


def test_lorenz_origin_is_equilibrium():
    spec = SystemSpec(kind="lorenz63")
    assert np.array_equal(step_lorenz63(np.zeros(3), spec), np.zeros(3))


def test_lorenz_fixed_point_c_plus():
    spec = SystemSpec(kind="lorenz63")
    c_plus = np.array([math.sqrt(72.0), math.sqrt(72.0), 27.0])
    assert np.max(np.abs(step_lorenz63(c_plus, spec) - c_plus)) < 1e-9


def test_lorenz_step_refinement():
    # substep refinement oracle: the gap to a 100x finer integration is
    # the one-step truncation error (measured ~1e-6 at generic points,
    # 1e-5 at the attractor wings); halving the step must shrink it at
    # 4th order
    for pt in ((1.2, 3.4, 15.0), (-8.0, -9.0, 25.0), (14.0, 18.0, 35.0)):
        x = np.array(pt)
        fine = step_lorenz63(x, SystemSpec(kind="lorenz63", substeps=100))
        e1 = np.max(np.abs(step_lorenz63(x, SystemSpec(kind="lorenz63", substeps=1)) - fine))
        e2 = np.max(np.abs(step_lorenz63(x, SystemSpec(kind="lorenz63", substeps=2)) - fine))
        assert e1 < 2e-5
        assert 10.0 < e1 / e2 < 22.0  # ~2^4 for a 4th-order one-step method


def test_lorenz_blowup_raises():
    spec = SystemSpec(kind="lorenz63", dt=50.0)
    x = np.array([1.0, 1.0, 1.0])
    with pytest.raises(IntegrationError):
        for _ in range(100):
            x = step_lorenz63(x, spec)


def test_l63rot_zero_rho_equilibrium():
    spec = SystemSpec(kind="l63rot", rho=0.0)
    assert np.array_equal(step_l63rot(np.zeros(4), spec), np.zeros(4))


def test_l63rot_product_structure():
    spec = SystemSpec(kind="l63rot", rho=0.3)
    a = step_l63rot(np.array([1.0, 1.0, 2.0, 20.0]), spec)
    b = step_l63rot(np.array([1.0, -5.0, 7.0, 31.0]), spec)
    assert a[0] == b[0]  # angle ignores the Lorenz block


def test_l63rot_angle_closed_form():
    rho = 0.1
    spec = SystemSpec(kind="l63rot", rho=rho)
    traj = generate_trajectory(
        spec, np.array([0.25, 1.0, 1.0, 20.0]), 1001, MeasurementMap(kind="full-state"), spinup=0
    )
    n = 1000
    assert abs(traj.states[n, 0] - (0.25 + n * rho) % TWO_PI) < 1e-9


def test_generate_full_state_identity():
    spec = SystemSpec(kind="torus-rotation", dt=1.0)
    traj = generate_trajectory(spec, np.array([0.3, 0.4]), 3, MeasurementMap(kind="full-state"))
    assert np.array_equal(traj.states, traj.measured)


def test_generate_trajectory_invariant_stepwise():
    for spec in (
        SystemSpec(kind="torus-rotation", dt=1.0),
        SystemSpec(kind="lorenz63"),
        SystemSpec(kind="l63rot", rho=0.1),
    ):
        w0 = np.full(spec.dim, 0.7)
        traj = generate_trajectory(spec, w0, 50, MeasurementMap(kind="full-state"), spinup=5)
        for n in (0, 17, 48):
            assert np.array_equal(traj.states[n + 1], step(spec, traj.states[n]))


def test_lorenz_spinup_bounding_box():
    # long-orbit oracle: the attractor sits inside a known box
    spec = SystemSpec(kind="lorenz63")
    traj = generate_trajectory(
        spec, np.array([1.0, 1.0, 1.05]), 20_000, MeasurementMap(kind="full-state"), spinup=10_000
    )
    s = traj.states
    assert s[:, 0].min() > -25 and s[:, 0].max() < 25
    assert s[:, 1].min() > -30 and s[:, 1].max() < 30
    assert s[:, 2].min() > 0 and s[:, 2].max() < 55


def test_normalization_zero_mean_unit_rms():
    spec = SystemSpec(kind="lorenz63")
    m = MeasurementMap(kind="full-state")
    traj = generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 5000, m)
    m.fit_normalization(traj.states)
    series = m(traj.states)
    assert np.max(np.abs(series.mean(axis=0))) < 1e-12
    assert abs(np.mean(np.sum(series**2, axis=1)) - 1.0) < 1e-12


def test_measurement_kinds():
    states = np.array([[0.5, 1.5, 10.0], [0.1, -2.0, 3.0]])
    proj = MeasurementMap(kind="coordinate-projection", indices=(2,))
    assert np.array_equal(proj.raw(states), states[:, 2:3])
    w = np.array([[1.0, 0.0, 2.0]])
    lin = MeasurementMap(kind="linear-combination", weights=w)
    assert np.allclose(lin.raw(states), states @ w.T)
    trig = MeasurementMap(kind="trigonometric", angle_indices=(0,), passthrough_indices=(2,))
    raw = trig.raw(states)
    assert np.allclose(raw[:, 0], np.cos(states[:, 0]))
    assert np.allclose(raw[:, 1], np.sin(states[:, 0]))
    assert np.allclose(raw[:, 2], states[:, 2])


def test_jacobian_torus_identity():
    assert np.array_equal(jacobian(SystemSpec(kind="torus-rotation"), np.array([1.0, 2.0])), np.eye(2))


def test_jacobian_matches_finite_differences():
    # central finite-difference oracle at attractor points
    spec = SystemSpec(kind="lorenz63")
    traj = generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 10, MeasurementMap(kind="full-state"))
    h = 1e-5
    for s in traj.states:
        J = jacobian(spec, s)
        fd = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd[:, j] = (step_lorenz63(s + e, spec) - step_lorenz63(s - e, spec)) / (2 * h)
        assert np.linalg.norm(J - fd) / np.linalg.norm(J) < 1e-4


def test_jacobian_l63rot_block_diagonal():
    spec = SystemSpec(kind="l63rot", rho=0.1)
    J = jacobian(spec, np.array([0.3, 1.0, 2.0, 20.0]))
    assert J[0, 0] == 1.0
    assert np.array_equal(J[0, 1:], np.zeros(3))
    assert np.array_equal(J[1:, 0], np.zeros(3))
    assert np.allclose(J[1:, 1:], jacobian(SystemSpec(kind="lorenz63"), np.array([1.0, 2.0, 20.0])))


def test_determinism_bitwise():
    spec = SystemSpec(kind="lorenz63")
    m = MeasurementMap(kind="full-state")
    a = generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 300, m)
    b = generate_trajectory(spec, np.array([1.0, 1.0, 1.05]), 300, m)
    assert a.states.tobytes() == b.states.tobytes()


def test_generate_validation():
    spec = SystemSpec(kind="torus-rotation")
    with pytest.raises(ValueError):
        generate_trajectory(spec, np.zeros(2), 0, MeasurementMap(kind="full-state"))
    with pytest.raises(ValueError):
        generate_trajectory(spec, np.array([np.nan, 0.0]), 5, MeasurementMap(kind="full-state"))


def test_spec_validation():
    with pytest.raises(ValueError):
        SystemSpec(kind="unknown")
    with pytest.raises(ValueError):
        SystemSpec(dt=-1.0)
    with pytest.raises(ValueError):
        SystemSpec(substeps=0)
