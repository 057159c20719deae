"""
Path-loss exponent fitting and heatmaps.

 Group 1 - Fit
   1.  Exact recovery of (K, gamma) from noiseless samples; noisy recovery within 0.1
   2.  Two distinct distances are enough
   3.  Noisy fit agrees with an ordinary least-squares regressor
   4.  Perturbing the optimum never lowers the squared error
   5.  Scale covariance in distance, shift covariance in loss
   6.  Fewer than two samples or one distance only is an error

 Group 2 - Samples from coverage maps
   7.  Empty scene gives gamma = 2
   8.  A radius smaller than the nearest cell gives no samples

 Group 3 - Heatmap and references
   9.  Empty scene: every candidate fits gamma = 2
  10.  Candidates in buildings or outside bounds are marked, not fatal
  11.  No candidates is an error
  12.  Ericsson model slope and unknown environment
  13.  Dense city exponents exceed free space; dense side of an asymmetric city is higher
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from sklearn.linear_model import LinearRegression

from src.core.errors import InsufficientSamplesError
from src.core.placement import lattice_points
from src.core.ple import (
    STATUS_IN_BUILDING,
    STATUS_OK,
    STATUS_OUT_OF_BOUNDS,
    PathLossSample,
    ericsson_path_loss_db,
    fit_ple,
    ple_heatmap,
    reference_rmse,
    samples_from_coverage,
)
from src.core.propagation import RayTracerConfig, Transmitter
from src.core.scene import GridSpec, Scene, rasterize
from src.core.synthetic import SyntheticParams, generate_synthetic_scene

from conftest import rect


def _samples(d, pl):
    return [PathLossSample(float(a), float(b)) for a, b in zip(d, pl)]


def _sse(samples, k_db, gamma):
    d = np.array([s.distance_m for s in samples])
    pl = np.array([s.path_loss_db for s in samples])
    return float(np.sum((pl - k_db - 10 * gamma * np.log10(d)) ** 2))


# ── Group 1: fit ─────────────────────────────────────────────────────────────

def test_exact_recovery():
    d = np.array([10.0, 30.0, 100.0, 300.0])
    fit = fit_ple(_samples(d, 32.45 + 30.0 * np.log10(d)))
    assert fit.gamma == pytest.approx(3.0, abs=1e-9)
    assert fit.k_db == pytest.approx(32.45, abs=1e-9)
    assert fit.rmse_db == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("k_db,gamma", [(32.45, 2.0), (30.0, 2.5), (35.0, 3.5)])
def test_recovery_under_noise(k_db, gamma):
    rng = np.random.default_rng(int(gamma * 10))
    d = rng.uniform(10, 700, 2000)
    clean = fit_ple(_samples(d, k_db + 10 * gamma * np.log10(d)))
    assert (clean.k_db, clean.gamma) == (pytest.approx(k_db, abs=1e-9), pytest.approx(gamma, abs=1e-9))
    hits = 0
    for _ in range(100):
        pl = k_db + 10 * gamma * np.log10(d) + rng.normal(0, 2.0, d.size)
        fit = fit_ple(_samples(d, pl))
        oracle = LinearRegression().fit(np.log10(d).reshape(-1, 1), pl)
        assert fit.gamma == pytest.approx(oracle.coef_[0] / 10.0, abs=1e-9)
        hits += abs(fit.gamma - gamma) <= 0.1
    assert hits >= 95


def test_two_points_solve_exactly():
    fit = fit_ple(_samples([10.0, 100.0], [60.0, 85.0]))
    assert fit.gamma == pytest.approx(2.5)
    assert fit.k_db == pytest.approx(35.0)


def test_matches_least_squares_regressor():
    rng = np.random.default_rng(5)
    d = rng.uniform(10, 700, 400)
    pl = 40.0 + 35.0 * np.log10(d) + rng.normal(0, 6.0, d.size)
    fit = fit_ple(_samples(d, pl))
    oracle = LinearRegression().fit(np.log10(d).reshape(-1, 1), pl)
    assert fit.gamma == pytest.approx(oracle.coef_[0] / 10.0, abs=1e-9)
    assert fit.k_db == pytest.approx(oracle.intercept_, abs=1e-7)


def test_perturbation_never_improves():
    rng = np.random.default_rng(11)
    eps = 1e-4
    for _ in range(100):
        n = int(rng.integers(3, 60))
        d = rng.uniform(5, 1000, n)
        pl = rng.uniform(30, 60) + rng.uniform(15, 45) * np.log10(d) + rng.normal(0, 4, n)
        samples = _samples(d, pl)
        fit = fit_ple(samples)
        best = _sse(samples, fit.k_db, fit.gamma)
        for dk, dg in ((eps, 0), (-eps, 0), (0, eps), (0, -eps), (eps, eps), (-eps, -eps), (eps, -eps)):
            assert _sse(samples, fit.k_db + dk, fit.gamma + dg) >= best - 1e-9


def test_scale_and_shift_covariance():
    rng = np.random.default_rng(2)
    d = rng.uniform(10, 500, 50)
    pl = 38.0 + 27.0 * np.log10(d) + rng.normal(0, 3, 50)
    base = fit_ple(_samples(d, pl))

    c = 3.7
    scaled = fit_ple(_samples(c * d, pl))
    assert scaled.gamma == pytest.approx(base.gamma, abs=1e-9)
    assert scaled.k_db == pytest.approx(base.k_db - 10 * base.gamma * math.log10(c), abs=1e-9)

    shifted = fit_ple(_samples(d, pl + 12.5))
    assert shifted.gamma == pytest.approx(base.gamma, abs=1e-9)
    assert shifted.k_db == pytest.approx(base.k_db + 12.5, abs=1e-9)


@pytest.mark.parametrize("samples", [
    [],
    [PathLossSample(10.0, 60.0)],
    [PathLossSample(10.0, 60.0), PathLossSample(10.0, 62.0), PathLossSample(10.0, 61.0)],
])
def test_insufficient_samples(samples):
    with pytest.raises(InsufficientSamplesError):
        fit_ple(samples)


def test_sample_validation():
    with pytest.raises(ValueError):
        PathLossSample(0.0, 50.0)


# ── Group 2: samples from coverage ───────────────────────────────────────────

def test_empty_scene_free_space_exponent(empty_scene, grid, engine, fast_cfg):
    tx = Transmitter(position=(50.0, 50.0), height_m=15.0)
    cmap = engine.compute_coverage_map(empty_scene, grid, tx, fast_cfg)
    mask = rasterize(empty_scene, grid)
    samples = samples_from_coverage(cmap, mask, max_radius_m=700.0, min_distance_m=10.0)
    assert len(samples) > 300
    assert fit_ple(samples).gamma == pytest.approx(2.0, abs=1e-6)
    refs = reference_rmse(samples, tx, grid.receiver_height_m)
    assert refs["friis_rmse_db"] == pytest.approx(0.0, abs=1e-6)


def test_radius_below_one_cell(empty_scene, grid, engine, fast_cfg):
    cmap = engine.compute_coverage_map(empty_scene, grid, Transmitter(position=(50.0, 50.0)), fast_cfg)
    mask = rasterize(empty_scene, grid)
    assert samples_from_coverage(cmap, mask, max_radius_m=1.0, min_distance_m=0.0) == []


# ── Group 3: heatmap and references ──────────────────────────────────────────

def test_heatmap_empty_scene(empty_scene, grid, engine, fast_cfg):
    points, shape = lattice_points(empty_scene.bounds, 40.0)
    heatmap = ple_heatmap(
        engine, empty_scene, grid, points, Transmitter(position=(0.0, 0.0)), fast_cfg,
        max_radius_m=700.0, min_samples=30, lattice_shape=shape,
    )
    assert heatmap.statuses == (STATUS_OK,) * len(points)
    np.testing.assert_allclose(heatmap.gammas, 2.0, atol=1e-6)


def test_heatmap_marks_bad_candidates(grid, engine, fast_cfg):
    scene = Scene(bounds=(0, 0, 100, 100), buildings=(rect(40, 40, 60, 60, 20),))
    heatmap = ple_heatmap(
        engine, scene, grid, [(50.0, 50.0), (150.0, 50.0), (10.0, 10.0)], Transmitter(position=(0.0, 0.0)),
        fast_cfg, max_radius_m=700.0, min_samples=30,
    )
    assert heatmap.statuses[:2] == (STATUS_IN_BUILDING, STATUS_OUT_OF_BOUNDS)
    assert np.isnan(heatmap.gammas[:2]).all()
    assert heatmap.statuses[2] == STATUS_OK


def test_heatmap_needs_candidates(empty_scene, grid, engine, fast_cfg):
    with pytest.raises(ValueError):
        ple_heatmap(engine, empty_scene, grid, [], Transmitter(position=(0.0, 0.0)), fast_cfg)


def test_ericsson_slope():
    f, hb, hr = 3.5e9, 15.0, 1.5
    slope = ericsson_path_loss_db(10_000.0, f, hb, hr) - ericsson_path_loss_db(1_000.0, f, hb, hr)
    assert slope == pytest.approx(30.2 + 0.1 * math.log10(hb))
    with pytest.raises(ValueError):
        ericsson_path_loss_db(100.0, f, hb, hr, environment="lunar")


@pytest.mark.slow
def test_dense_city_exponent_above_free_space(grid):
    from src.adapters.output.propagation import RayLaunchingEngine

    scene = generate_synthetic_scene("uniform-city", SyntheticParams(density=0.9), seed=3)
    mask = rasterize(scene, grid)
    cfg = RayTracerConfig(num_samples=2**15, max_depth=3)
    # 10 m sits in the street ring outside the lot lattice.
    tx = Transmitter(position=(150.0, 10.0), height_m=15.0)
    cmap = RayLaunchingEngine(threads=2).compute_coverage_map(scene, grid, tx, cfg, mask)
    assert fit_ple(samples_from_coverage(cmap, mask, 700.0, 10.0)).gamma > 2.0


@pytest.mark.slow
def test_asymmetric_city_dense_side_higher(grid):
    from src.adapters.output.propagation import RayLaunchingEngine

    scene = generate_synthetic_scene("asymmetric-city", SyntheticParams(), seed=0)
    points, shape = lattice_points(scene.bounds, 50.0)
    heatmap = ple_heatmap(
        RayLaunchingEngine(threads=2), scene, grid, points,
        Transmitter(position=(0.0, 0.0), height_m=15.0), RayTracerConfig(num_samples=2**14, max_depth=3),
        max_radius_m=150.0, min_samples=30, threads=2, lattice_shape=shape,
    )
    left = heatmap.mean_gamma(lambda p: p[0] < 150.0)
    right = heatmap.mean_gamma(lambda p: p[0] >= 150.0)
    assert right > left
