"""
Densification power model and the station class table.

 Group 1 - Transmit power scaling
   1.  n = 1 is the baseline; gamma = 2 is flat; gamma = 3 grows linearly in n
   2.  n < 1 is refused

 Group 2 - Net power
   3.  Golden sweep for gamma=3, s=0.01
   4.  s = 0 decreases forever for gamma > 2; s > 0 is minimized at a finite n
   5.  The discrete optimum sits next to the continuous stationary point
   6.  Crossover: first n where densifying stops paying off
   7.  Ties go to the smaller n

 Group 3 - Class table and conversions
   8.  Published totals: 30 femto = 312 W, 1 macro = 1000 W
   9.  Negative counts and unknown classes raise
  10.  dBm / W round trip and PA input power
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from src.core.power import (
    STATION_CLASSES,
    DensificationParams,
    class_pa_input_power_w,
    continuous_optimum,
    crossover_n,
    dbm_to_watts,
    densification_report,
    get_station_class,
    net_power_ratio,
    network_total_power_w,
    optimal_densification,
    pa_input_power_w,
    tx_power_ratio,
    watts_to_dbm,
)


# ── Group 1: scaling ─────────────────────────────────────────────────────────

def test_tx_power_ratio():
    assert tx_power_ratio(1, 3.5) == 1.0
    assert tx_power_ratio(4, 2.0) == 1.0
    assert tx_power_ratio(2, 3.0) == pytest.approx(2.0)
    assert tx_power_ratio(2, 2.0) == pytest.approx(1.0)
    assert tx_power_ratio(16, 4.0) == pytest.approx(256.0)


def test_n_below_one():
    with pytest.raises(ValueError):
        tx_power_ratio(0, 3.0)
    with pytest.raises(ValueError):
        net_power_ratio(0, DensificationParams())


# ── Group 2: net power ───────────────────────────────────────────────────────

def test_golden_sweep_gamma3_s001():
    p = DensificationParams(gamma=3.0, s=0.01)
    expected = [1.010000, 0.540000, 0.423333, 0.410000]
    got = [net_power_ratio(n, p) for n in range(1, 5)]
    assert got == pytest.approx(expected, abs=1e-6)
    n_star, power_w = optimal_densification(p, n_max=16)
    assert n_star == 4
    assert power_w == pytest.approx(41.0)


def test_no_interference_keeps_falling():
    p = DensificationParams(gamma=3.5, s=0.0)
    ratios = [net_power_ratio(n, p) for n in range(1, 40)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert optimal_densification(p, n_max=39)[0] == 39
    assert continuous_optimum(p) is None


@pytest.mark.parametrize("gamma,s", [(3.0, 0.05), (3.0, 0.005), (3.5, 0.01), (4.0, 0.001)])
def test_discrete_optimum_near_continuous(gamma, s):
    p = DensificationParams(gamma=gamma, s=s)
    n_star, _ = optimal_densification(p, n_max=200)
    assert abs(n_star - continuous_optimum(p)) <= 1.0
    ratios = np.array([net_power_ratio(n, p) for n in range(1, 201)])
    # Unimodal: falls to the optimum, rises after it.
    assert np.all(np.diff(ratios[:n_star]) < 0)
    assert np.all(np.diff(ratios[n_star - 1:]) > 0)


def test_report_and_crossover():
    p = DensificationParams(gamma=3.0, s=0.01)
    report = densification_report(p, n_max=16)
    assert report.n_star == 4
    assert report.crossover_n == 10
    assert report.continuous_n_star == pytest.approx(50 ** (1 / 3))
    assert crossover_n(DensificationParams(gamma=3.0, s=0.0001), n_max=16) is None


def test_tie_prefers_fewer_stations():
    # gamma = 2 and s = 0: every n costs the same.
    assert optimal_densification(DensificationParams(gamma=2.0, s=0.0), n_max=8)[0] == 1


# ── Group 3: class table ─────────────────────────────────────────────────────

def test_published_totals():
    assert network_total_power_w(get_station_class("femto"), 30) == pytest.approx(312.0)
    assert network_total_power_w(get_station_class("macro"), 1) == 1000.0
    assert list(STATION_CLASSES) == ["macro", "micro", "pico", "femto"]


def test_table_guards():
    with pytest.raises(ValueError):
        network_total_power_w(get_station_class("pico"), -1)
    with pytest.raises(ValueError):
        get_station_class("relay")


def test_conversions():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(47.0) == pytest.approx(50.12, abs=0.01)
    assert watts_to_dbm(dbm_to_watts(17.0)) == pytest.approx(17.0)
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)
    assert pa_input_power_w(10.0, 0.4) == pytest.approx(25.0)
    assert pa_input_power_w(40.0, 0.4) == pytest.approx(100.0)
    assert pa_input_power_w(20.0, 0.4) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        pa_input_power_w(10.0, 0.0)
    femto = get_station_class("femto")
    assert class_pa_input_power_w(femto, 0.5) == pytest.approx(2 * dbm_to_watts(17.0))
    assert math.isfinite(class_pa_input_power_w(get_station_class("macro")))
