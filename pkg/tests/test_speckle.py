import math

import numpy as np
import pytest

from secondorder import analytic
from secondorder.errors import GridResolutionError, ValidationError
from secondorder.fringes import fit_fringe, visibility
from secondorder.geometry import DoubleSlitMask, SingleSlitMask
from secondorder.speckle import (
    SourceGrid,
    arm_matrix,
    field_at_detector,
    make_source_grid,
    run_realization,
    sample_source,
    simulate,
    simulate_first_order,
    slit_samples,
    source_fields,
    stream_key,
)

MM = 1e-3
UM = 1e-6


def _point_source_realization(setup, x_s=0.0):
    grid = make_source_grid(setup, 129)
    i = int(np.argmin(np.abs(grid.positions - x_s)))
    field = np.zeros(len(grid), dtype=complex)
    field[i] = 1.0
    real = sample_source(grid, 0, 0)
    return type(real)(grid, field, 0, 0), grid.positions[i]


# ---------------------------------------------------------------- source grid


def test_grid_invariants():
    x = np.linspace(-1, 1, 200)
    with pytest.raises(ValidationError, match="128"):
        SourceGrid(x[:100], np.ones(100), x[1] - x[0])
    with pytest.raises(ValidationError, match="weights"):
        SourceGrid(x, -np.ones(200), x[1] - x[0])
    with pytest.raises(ValidationError, match="spacing"):
        SourceGrid(x, np.ones(200), 0.5)


def test_default_grid(setup, hard_edge):
    for s in (setup, hard_edge):
        g = make_source_grid(s)
        assert len(g) == 1024
        assert np.sum(g.amplitude_weights**2) == pytest.approx(1.0)
        lo, hi = s.source_support
        assert g.positions[0] > lo and g.positions[-1] < hi


# ---------------------------------------------------------------- source sampling


def test_sampling_deterministic(setup):
    g = make_source_grid(setup, 256)
    a = sample_source(g, 42, 7)
    b = sample_source(g, 42, 7)
    assert np.array_equal(a.field, b.field)
    assert not np.array_equal(a.field, sample_source(g, 42, 8).field)
    assert not np.array_equal(a.field, sample_source(g, 43, 7).field)


def test_sampling_independent_of_order(setup):
    g = make_source_grid(setup, 256)
    batch = source_fields(g, 9, [5, 2, 11])
    for row, idx in zip(batch, (5, 2, 11)):
        assert np.array_equal(row, sample_source(g, 9, idx).field)


def test_stream_keys_distinct(setup):
    g = make_source_grid(setup, 256)
    a = sample_source(g, stream_key(3, 0), 0).field
    b = sample_source(g, stream_key(3, 1), 0).field
    assert stream_key(3, 0) == 3
    assert not np.array_equal(a, b)


def test_sampling_zero_mean(setup):
    g = make_source_grid(setup, 256)
    n = 10_000
    f = source_fields(g, 1, range(n))
    sigma = g.amplitude_weights / math.sqrt(2 * n)  # per real component of the mean
    zr = f.mean(axis=0).real / sigma
    zi = f.mean(axis=0).imag / sigma
    z = np.concatenate([zr, zi])
    assert np.max(np.abs(z)) < 5.0
    assert np.mean(np.abs(z) < 3.0) > 0.99


def test_sampling_covariance(setup):
    g = make_source_grid(setup, 128)
    n = 20_000
    f = source_fields(g, 2, range(n))
    cov = f.T @ f.conj() / n
    w2 = g.amplitude_weights**2
    # Standard error of a sample mean of |f|^2 (exponential with mean w2) is w2/sqrt(n).
    assert np.all(np.abs(np.diag(cov).real - w2) < 5 * w2 / math.sqrt(n))
    off = cov - np.diag(np.diag(cov))
    scale = np.sqrt(np.outer(w2, w2) / n)
    assert np.max(np.abs(off) / np.where(scale > 0, scale, 1)) < 6.0


# ---------------------------------------------------------------- propagation


def test_slit_samples():
    nodes, w = slit_samples(DoubleSlitMask(0.0, 0.5 * MM, 40 * UM), 8)
    assert nodes.size == 16 and w.sum() == pytest.approx(2.0)
    assert nodes[:8].mean() == pytest.approx(-0.25 * MM)
    nodes, w = slit_samples(DoubleSlitMask(0.0, 0.5 * MM, 0.0), 8)
    assert nodes.size == 2 and np.all(w == 1.0)


def test_point_source_single_slit_flat(setup):
    real, _ = _point_source_realization(setup, 0.0)
    E = field_at_detector(real, setup, SingleSlitMask(0.0, 0.0), np.linspace(-2 * MM, 2 * MM, 21))
    assert np.allclose(np.abs(E), np.abs(E[0]), rtol=1e-12)


def test_point_source_double_slit_young(setup):
    real, _ = _point_source_realization(setup, 0.0)
    mask = DoubleSlitMask(0.0, 0.57 * MM, 0.0)
    x = np.linspace(-0.7 * MM, 0.7 * MM, 701)
    I = np.abs(field_at_detector(real, setup, mask, x)) ** 2
    laser = analytic.first_order_intensity(setup, mask, x, "laser")
    assert np.allclose(I / I.max(), laser / laser.max(), atol=1e-9)
    assert visibility(I) == pytest.approx(1.0, abs=1e-6)
    assert fit_fringe(x, I / I.max()).period == pytest.approx(setup.lambda_f / mask.separation, rel=1e-3)


def test_laser_first_order_matches_analytic(setup, slit_masks):
    x = np.linspace(-0.3 * MM, 0.3 * MM, 31)
    for mask in slit_masks:
        mc = simulate_first_order(setup, mask, x, 1, 0, "laser")
        an = analytic.first_order_intensity(setup, mask, x, "laser")
        assert np.allclose(mc / mc.max(), an / an.max(), atol=0.01)


def test_chaotic_first_order_washed_out(setup):
    mask = DoubleSlitMask(0.0, 0.57 * MM, 0.0, "T")
    x = np.linspace(-0.3 * MM, 0.3 * MM, 31)
    I = simulate_first_order(setup, mask, x, 10_000, 11, "chaotic")
    assert visibility(I) < 0.1


def test_resolution_error(setup):
    coarse = make_source_grid(setup, 128)
    far = DoubleSlitMask(20 * MM, 0.5 * MM, 0.0)
    with pytest.raises(GridResolutionError):
        arm_matrix(setup, coarse, [(far, 0.0)])


# ---------------------------------------------------------------- realizations


def test_run_realization_deterministic_and_swap(setup, point_masks):
    g = make_source_grid(setup, 256)
    real = sample_source(g, 5, 3)
    mC, mT = point_masks
    a = run_realization(real, setup, mC, mT, 0.1 * MM, -0.2 * MM)
    b = run_realization(real, setup, mC, mT, 0.1 * MM, -0.2 * MM)
    assert a == b
    s = run_realization(real, setup, mT, mC, -0.2 * MM, 0.1 * MM)
    assert (s.I_C, s.I_T) == (a.I_T, a.I_C)
    assert a.I_C >= 0 and a.I_T >= 0


def test_ensemble_limit_equals_four_path_analytic(setup, point_masks):
    # Exact ensemble average of the direct-sum engine: M_C^H diag(w^2) M_T.
    mC, mT = point_masks
    g = make_source_grid(setup)
    xs = np.linspace(-0.6 * MM, 0.6 * MM, 21)
    MC = arm_matrix(setup, g, [(mC, float(x)) for x in xs])
    MT = arm_matrix(setup, g, [(mT, float(x)) for x in xs])
    G1 = (MC.conj() * g.amplitude_weights**2) @ MT.T
    limit = np.abs(G1) ** 2
    an = analytic.raw_correlation(setup, mC, mT, xs[:, None], xs[None, :], "four_path")
    assert np.allclose(limit / limit.max(), an / an.max(), atol=1e-3)


def test_simulated_map_matches_analytic(setup, point_masks):
    mC, mT = point_masks
    xs = np.linspace(-0.6 * MM, 0.6 * MM, 11)
    mc = simulate(setup, [(mC, float(x)) for x in xs], [(mT, float(x)) for x in xs], 5000, 3, outer=True)
    vals = mc.fluct_corr / mc.fluct_corr.max()
    an = analytic.correlation_map(setup, mC, mT, xs[:, None], xs[None, :], "four_path")
    assert np.sqrt(np.mean((vals - an) ** 2)) < 0.05


def test_workers_do_not_change_result(setup, point_masks):
    mC, mT = point_masks
    xs = np.linspace(-0.3 * MM, 0.3 * MM, 5)
    args = (setup, [(mC, float(x)) for x in xs], [(mT, float(x)) for x in xs], 2100, 17)
    serial = simulate(*args, workers=1, batch_size=300)
    parallel = simulate(*args, workers=3, batch_size=300)
    assert np.array_equal(serial.result.fluct_corr, parallel.result.fluct_corr)
    assert np.array_equal(serial.result.std_error, parallel.result.std_error)


def test_siegert_two_detectors_one_coherence_cell(setup):
    # Two pinholes a quarter coherence length apart: normalized correlation = |g1|^2.
    lc = setup.source.coherence_length
    pC, pT = SingleSlitMask(0.0, 0.0, "C"), SingleSlitMask(lc / 4, 0.0, "T")
    mc = simulate(setup, [(pC, 0.0)], [(pT, 0.0)], 10_000, 21)
    expected = analytic.coherence_factor(setup, lc / 4) ** 2
    r = mc.result
    assert abs(r.normalized[0] - expected) < 5 * r.normalized_std_error[0]


def test_error_scales_as_inverse_sqrt_n(setup):
    p = SingleSlitMask(0.0, 0.0, "C"), SingleSlitMask(0.0, 0.0, "T")
    errs = []
    for n in (1_000, 10_000, 100_000):
        mc = simulate(setup, [(p[0], 0.0)], [(p[1], 0.0)], n, 4, source_points=512)
        errs.append(mc.result.normalized_std_error[0])
    for lo, hi in zip(errs, errs[1:]):
        ratio = lo / hi
        assert math.sqrt(10) / 2 < ratio < 2 * math.sqrt(10)


def test_too_few_realizations(setup, point_masks):
    mC, mT = point_masks
    with pytest.raises(ValidationError):
        simulate(setup, [(mC, 0.0)], [(mT, 0.0)], 1, 0)
