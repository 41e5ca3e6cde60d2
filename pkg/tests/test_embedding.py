import math

import numpy as np
import pytest
from scipy.linalg import svdvals
from scipy.spatial.distance import pdist

from dynrecon import (
    DelayEmbedder,
    MeasurementMap,
    ReservoirEmbedder,
    SystemSpec,
    delay_embed,
    delay_g,
    generate_trajectory,
    golden_rotation,
    reservoir_drive,
    reservoir_g,
    reservoir_init,
)


def torus_series(n, seed=0):
    spec = SystemSpec(kind="torus-rotation", rho=golden_rotation(), dt=1.0)
    m = MeasurementMap(kind="trigonometric", angle_indices=(0, 1))
    traj = generate_trajectory(spec, np.array([0.1, 0.6]), n, m)
    m.fit_normalization(traj.states)
    return m(traj.states)


def test_delay_embed_single_delay_identity():
    series = np.array([1.0, 2.0, 3.0])
    e = delay_embed(series, 1)
    assert e.start == 0
    assert np.array_equal(e.y, series[:, None])


def test_delay_embed_unrolled_definition():
    e = delay_embed(np.array([1.0, 2.0, 3.0, 4.0]), 3)
    assert e.start == 2
    assert np.array_equal(e.at(2), [3.0, 2.0, 1.0])
    assert np.array_equal(e.at(3), [4.0, 3.0, 2.0])


def test_delay_embed_too_short():
    with pytest.raises(ValueError):
        delay_embed(np.array([1.0, 2.0]), 3)


def test_delay_embed_pairwise_distinct_on_torus():
    # brute-force pairwise scan: the quasiperiodic orbit never revisits
    # a window, consistent with embedding injectivity
    series = torus_series(1000)
    e = delay_embed(series, 5)
    assert pdist(e.y).min() > 0.0


def test_delay_g_shift_insert():
    assert np.array_equal(delay_g(np.array([5.0]), np.array([3.0, 2.0, 1.0])), [5.0, 3.0, 2.0])


def test_delay_g_consistency_with_embed():
    series = torus_series(50)
    e = delay_embed(series, 4)
    for n in range(len(e) - 1):
        assert np.array_equal(delay_g(series[e.start + n + 1], e.y[n]), e.y[n + 1])


def test_delay_g_linearity():
    rng = np.random.default_rng(0)
    u, up = rng.standard_normal((2, 3))
    y, yp = rng.standard_normal((2, 12))
    a, b = 1.7, -0.4
    lhs = delay_g(a * u + b * up, a * y + b * yp, d=3)
    rhs = a * delay_g(u, y, d=3) + b * delay_g(up, yp, d=3)
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_delay_phi_samples_alignment():
    # the strictly causal sample at index n is the window ending at n-1,
    # so the update y_{n+1} = g(measured[n], y_n) holds along the series
    series = torus_series(40)
    emb = DelayEmbedder(q=3, d=series.shape[1])
    phi = emb.phi_samples(series)
    assert phi.start == 3
    for n in range(phi.start, phi.start + len(phi) - 1):
        assert np.array_equal(emb.g(series[n], phi.at(n)), phi.at(n + 1))


def test_reservoir_init_norm_and_determinism():
    emb = reservoir_init(100, 3, 0.85, seed=42)
    assert abs(svdvals(emb.w_res)[0] - 0.85) < 1e-10
    assert np.allclose(np.linalg.norm(emb.b, axis=0), 1.0, atol=1e-12)
    emb2 = reservoir_init(100, 3, 0.85, seed=42)
    assert np.array_equal(emb.w_res, emb2.w_res) and np.array_equal(emb.b, emb2.b)
    with pytest.raises(ValueError):
        reservoir_init(10, 2, 1.2, seed=0)


def test_reservoir_sampled_jacobian_bound():
    # the analytic contraction bound holds at sampled states:
    # dg/dy = diag(1 - tanh^2) W has norm <= ||W|| = 0.9
    emb = reservoir_init(200, 3, 0.9, seed=1)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        u = rng.uniform(-2, 2, 3)
        y = rng.uniform(-1, 1, 200)
        _, g2 = emb.g_jacobians(u, y)
        worst = max(worst, svdvals(g2)[0])
    assert worst <= 0.9 + 1e-12


def test_reservoir_g_zero_map_and_range():
    emb = ReservoirEmbedder(w_res=np.zeros((8, 8)), b=np.zeros((8, 2)), contraction=0.5)
    assert np.array_equal(reservoir_g(emb, np.ones(2), np.ones(8)), np.zeros(8))
    emb2 = reservoir_init(16, 2, 0.9, seed=3)
    rng = np.random.default_rng(4)
    out = reservoir_g(emb2, rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 16))
    assert np.all(out > -1.0) and np.all(out < 1.0)


def test_reservoir_g_contraction_sampled():
    emb = reservoir_init(32, 2, 0.8, seed=5)
    rng = np.random.default_rng(6)
    for _ in range(1000):
        u = rng.uniform(-2, 2, 2)
        y1, y2 = rng.uniform(-1.5, 1.5, (2, 32))
        lhs = np.linalg.norm(reservoir_g(emb, u, y1) - reservoir_g(emb, u, y2))
        assert lhs <= 0.8 * np.linalg.norm(y1 - y2) + 1e-12


def test_reservoir_g_dimension_mismatch():
    emb = reservoir_init(16, 2, 0.9, seed=7)
    with pytest.raises(ValueError):
        reservoir_g(emb, np.ones(3), np.ones(16))


def test_drive_contraction_iterate():
    series = torus_series(400)
    emb = reservoir_init(32, series.shape[1], 0.9, seed=8)
    rng = np.random.default_rng(9)
    y0a, y0b = rng.uniform(-1, 1, (2, 32))
    # manual drive to inspect the pre-washout contraction
    ya, yb = y0a.copy(), y0b.copy()
    base = np.linalg.norm(y0a - y0b)
    for n in range(100):
        ya = np.tanh(emb.w_res @ ya + emb.b @ series[n])
        yb = np.tanh(emb.w_res @ yb + emb.b @ series[n])
        assert np.linalg.norm(ya - yb) <= 0.9 ** (n + 1) * base + 1e-15


def test_drive_memoryless_limit():
    series = torus_series(30)
    emb = ReservoirEmbedder(
        w_res=np.zeros((8, 8)), b=np.ones((8, series.shape[1])), contraction=0.5
    )
    y = np.full(8, 0.3)
    y1 = reservoir_g(emb, series[0], y)
    assert np.allclose(y1, np.tanh(emb.b @ series[0]))
    y_other = reservoir_g(emb, series[0], np.full(8, -0.9))
    assert np.array_equal(y1, y_other)


def test_echo_state_convergence():
    series = torus_series(600)
    emb = reservoir_init(48, series.shape[1], 0.9, seed=10)
    assert emb.washout == math.ceil(math.log(1e-10) / math.log(0.9))
    rng = np.random.default_rng(11)
    a = reservoir_drive(emb, series, rng.uniform(-1, 1, 48))
    b = reservoir_drive(emb, series, rng.uniform(-1, 1, 48))
    assert a.start == emb.washout
    assert np.max(np.abs(a.y - b.y)) < 1e-8


def test_embedded_series_indexing():
    e = delay_embed(np.arange(10.0), 3)
    with pytest.raises(IndexError):
        e.at(1)
    with pytest.raises(IndexError):
        e.at(10)
    assert np.array_equal(e.at(9), [9.0, 8.0, 7.0])


def test_contraction_certificate_reports_bounds():
    emb = reservoir_init(32, 3, 0.9, seed=12)
    cert = emb.contraction_certificate(samples=50, seed=13)
    assert cert["sup_dg_dy"] <= cert["bound_dg_dy"] + 1e-12
    assert cert["sup_dg_du"] <= cert["bound_dg_du"] + 1e-12
    assert abs(cert["max_column_norm_b"] - 1.0) < 1e-12
