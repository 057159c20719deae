"""
User-side uplink power.

 Group 1 - Required power
   1.  Sensitivity + margin + path loss, per serving class
   2.  Uplink loss equals the serving station's downlink loss
   3.  Best server by downlink; ties go to the lower station index
   4.  A user no station reaches is an error

 Group 2 - User drop
   5.  Users land inside the green region
   6.  Same seed, same users; another seed moves them
   7.  Empty region is an error
   8.  Per-class downlink thresholds shape the green region

 Group 3 - Network comparison
   9.  Identical networks: zero delta, equal stats
  10.  Adding stations never raises any user's required power
  11.  Mean delta is the difference of per-network feasible means; paired delta stays separate
  12.  Stats: ordered percentiles and infeasible fraction
  13.  Macro vs greedy femto network: femto users transmit less (slow)
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from src.core.errors import EmptyRegionError, UncoveredUserError
from src.core.propagation import CoverageMap, RayTracerConfig, Transmitter
from src.core.scene import GridSpec, Scene, rasterize
from src.core.ue import (
    PERCENTILES,
    UeSimConfig,
    compare_networks,
    compare_networks_detailed,
    evaluate_users,
    green_region,
    populate_users,
    required_uplink_power,
    tx_power_stats,
    users_in_region,
)


@pytest.fixture
def mask():
    # 10 x 10 cells of 5 m.
    return rasterize(Scene(bounds=(0, 0, 50, 50)), GridSpec(cell_size_m=5.0))


def _map(mask, loss, position=(25.0, 25.0), power=17.0, station_class="femto"):
    tx = Transmitter(position=position, tx_power_dbm=power, station_class=station_class)
    loss = np.broadcast_to(np.asarray(loss, dtype=float), mask.grid.shape).copy()
    return CoverageMap(grid=mask.grid, tx=tx, path_loss_db=loss)


def _distance_map(mask, position, base=40.0):
    xs, ys = mask.grid.centers()
    d = np.hypot(xs - position[0], ys - position[1]) + 1.0
    return _map(mask, base + 30.0 * np.log10(d), position=position)


# ── Group 1: required power ──────────────────────────────────────────────────

def test_required_power_femto(mask):
    sample = required_uplink_power((12.0, 12.0), [_map(mask, 80.0)], UeSimConfig())
    assert sample.required_tx_dbm == pytest.approx(-90.0 + 15.0 + 80.0)
    assert sample.feasible
    assert sample.serving_station == 0
    assert sample.downlink_rx_dbm == pytest.approx(17.0 - 80.0)


def test_required_power_macro_over_budget(mask):
    macro = _map(mask, 120.0, power=47.0, station_class="macro")
    sample = required_uplink_power((12.0, 12.0), [macro], UeSimConfig())
    assert sample.required_tx_dbm == pytest.approx(35.0)
    assert not sample.feasible


def test_uplink_uses_downlink_loss(mask):
    cmap = _distance_map(mask, (5.0, 5.0))
    cfg = UeSimConfig(snr_margin_db=10.0)
    users = np.array([[2.0, 2.0], [27.0, 31.0], [49.0, 49.0]])
    result = evaluate_users(users, [cmap], cfg)
    i, j = mask.grid.cell_of(users[:, 0], users[:, 1])
    expected = cfg.sensitivity_for("femto") + 10.0 + cmap.path_loss_db[i, j]
    np.testing.assert_allclose(result.required_tx_dbm, expected)


def test_best_server_and_ties(mask):
    west = _distance_map(mask, (5.0, 25.0))
    east = _distance_map(mask, (45.0, 25.0))
    result = evaluate_users(np.array([[3.0, 25.0], [47.0, 25.0]]), [west, east], UeSimConfig())
    assert list(result.serving) == [0, 1]
    twin = evaluate_users(np.array([[3.0, 25.0]]), [west, west], UeSimConfig())
    assert twin.serving[0] == 0


def test_unreached_user(mask):
    loss = np.full(mask.grid.shape, 80.0)
    loss[0, 0] = np.nan
    with pytest.raises(UncoveredUserError):
        evaluate_users(np.array([[10.0, 10.0], [1.0, 1.0]]), [_map(mask, loss)], UeSimConfig())


def test_unknown_class_sensitivity(mask):
    relay = _map(mask, 80.0, station_class="relay")
    with pytest.raises(ValueError):
        required_uplink_power((12.0, 12.0), [relay], UeSimConfig())


# ── Group 2: user drop ───────────────────────────────────────────────────────

def test_users_inside_region(mask):
    region = np.zeros(mask.grid.shape, dtype=bool)
    region[2:4, 6:9] = True
    users = users_in_region(region, mask, 500, seed=1)
    assert users.shape == (500, 2)
    i, j = mask.grid.cell_of(users[:, 0], users[:, 1])
    assert region[i, j].all()


def test_user_drop_is_seeded(mask):
    region = mask.outdoor
    a = users_in_region(region, mask, 200, seed=7)
    np.testing.assert_array_equal(a, users_in_region(region, mask, 200, seed=7))
    assert not np.array_equal(a, users_in_region(region, mask, 200, seed=8))


def test_empty_region(mask):
    with pytest.raises(EmptyRegionError):
        users_in_region(np.zeros(mask.grid.shape, dtype=bool), mask, 10, seed=0)
    # 17 - 120 = -103 dBm is below the -75 dBm default everywhere.
    with pytest.raises(EmptyRegionError):
        populate_users([_map(mask, 120.0)], mask, UeSimConfig(num_users=10))


def test_class_threshold_shapes_region(mask):
    cmap = _distance_map(mask, (25.0, 25.0))
    loose = green_region([cmap], mask, UeSimConfig())
    tight = green_region([cmap], mask, UeSimConfig(downlink_threshold_dbm={"femto": -50.0}))
    assert tight.sum() < loose.sum()
    assert np.all(loose | ~tight)


def test_num_users_validated():
    with pytest.raises(ValueError):
        UeSimConfig(num_users=0)


# ── Group 3: network comparison ──────────────────────────────────────────────

def test_identical_networks(mask):
    net = [_distance_map(mask, (10.0, 10.0)), _distance_map(mask, (40.0, 40.0))]
    stats_a, stats_b, delta = compare_networks(net, net, mask, UeSimConfig(num_users=300))
    assert delta == 0.0
    assert stats_a.as_record() == stats_b.as_record()


def test_added_stations_never_hurt(mask):
    base = [_distance_map(mask, (10.0, 10.0))]
    denser = base + [_distance_map(mask, (40.0, 40.0)), _distance_map(mask, (40.0, 10.0))]
    result = compare_networks_detailed(base, denser, mask, UeSimConfig(num_users=400, seed=3))
    assert np.all(result.result_b.required_tx_dbm <= result.result_a.required_tx_dbm + 1e-12)
    assert result.mean_delta_db > 0.0


def test_delta_is_difference_of_feasible_means(mask):
    # Last column: 130 dB puts the macro user at 45 dBm, over the cap; the femto one at 15 dBm.
    macro_loss = np.full(mask.grid.shape, 80.0)
    macro_loss[:, -1] = 130.0
    femto_loss = np.full(mask.grid.shape, 60.0)
    femto_loss[:, -1] = 90.0
    macro = _map(mask, macro_loss, power=47.0, station_class="macro")
    femto = _map(mask, femto_loss)
    cfg = UeSimConfig(num_users=2000, seed=1, downlink_threshold_dbm={"macro": -100.0, "femto": -100.0})

    result = compare_networks_detailed([macro], [femto], mask, cfg)
    assert result.stats_a.infeasible_fraction > 0.0
    assert result.stats_b.infeasible_fraction == 0.0
    assert result.mean_delta_db == pytest.approx(result.stats_a.mean_dbm - result.stats_b.mean_dbm)
    # Users feasible in both sit off the last column: -5 dBm against -15 dBm.
    assert result.paired_delta_db == pytest.approx(10.0)
    assert result.mean_delta_db < 10.0


def test_stats_percentiles_and_infeasible():
    values = np.arange(100, dtype=float)
    feasible = values < 80
    stats = tx_power_stats(values, feasible)
    pct = [stats.percentiles[p] for p in PERCENTILES]
    assert pct == sorted(pct)
    assert stats.infeasible_fraction == pytest.approx(0.2)
    assert stats.count == 100
    assert stats.cdf.size == 80
    assert stats.mean_dbm == pytest.approx(39.5)
    assert set(stats.as_record()["percentiles"]) == {f"p{p}" for p in PERCENTILES}


def test_stats_all_infeasible():
    stats = tx_power_stats(np.array([30.0, 31.0]), np.array([False, False]))
    assert math.isnan(stats.mean_dbm)
    assert stats.infeasible_fraction == 1.0


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_femto_network_lowers_user_power(seed):
    from src.adapters.output.propagation import RayLaunchingEngine
    from src.core.errors import TargetUnreachableError
    from src.core.placement import (
        CandidateCache,
        PlacementProblem,
        candidate_maps,
        greedy_placement,
        macro_reference,
    )
    from src.core.synthetic import SyntheticParams, generate_synthetic_scene

    engine = RayLaunchingEngine(threads=4)
    scene = generate_synthetic_scene(
        "uniform-city", SyntheticParams(width_m=200, depth_m=200, density=0.9), seed=seed
    )
    problem = PlacementProblem.create(
        scene, GridSpec(cell_size_m=5.0), tracer_cfg=RayTracerConfig(num_samples=2**13, max_depth=3, seed=seed)
    )
    mask = problem.mask
    # Above every rooftop, so the macro is never inside a building.
    macro_tx = Transmitter(position=(100.0, 100.0), height_m=50.0, tx_power_dbm=47.0, station_class="macro")
    macro_map = engine.compute_coverage_map(scene, problem.grid, macro_tx, problem.tracer_cfg, mask)
    e_m, _ = macro_reference(problem, macro_tx, cmap=macro_map)
    problem = problem.with_target(problem.target_from_reference(e_m))

    positions, maps = candidate_maps(problem, engine, threads=4)
    cache = CandidateCache.from_maps(positions, maps, mask, problem.sensitivity_dbm)
    try:
        solution = greedy_placement(problem, cache)
    except TargetUnreachableError as exc:
        solution = exc.solution
    femto_net = [maps[k] for k in solution.site_indices]

    cfg = UeSimConfig(num_users=10_000, seed=seed)
    result = compare_networks_detailed([macro_map], femto_net, mask, cfg)
    assert result.mean_delta_db > 0.0
    # Same drop, more femto stations: no user needs more power.
    extra = [maps[k] for k in range(0, len(maps), 7) if k not in solution.site_indices]
    denser = evaluate_users(result.users, femto_net + extra, cfg)
    assert np.all(denser.required_tx_dbm <= result.result_b.required_tx_dbm + 1e-12)
