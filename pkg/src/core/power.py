"""
Analytic power models for base-station densification.

Replacing one station by n^2 stations each covering 1/n of the radius cuts
the per-station transmit power by n^gamma, so the network transmits
n^(gamma-2) times less. Each extra station also pays a fixed interface power
s * P_tx^R, which is what eventually makes densification stop paying off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional

from src.config import settings

TABLE_VERSION = "2024.1"


@dataclass(frozen=True)
class StationClass:
    name: str
    tx_power_dbm: float
    total_power_w: float
    # None where no mounting height is published for the class.
    typical_height_m: Optional[float] = None
    pa_efficiency: Optional[float] = None

    def __post_init__(self):
        if not self.total_power_w > 0:
            raise ValueError(f"total_power_w must be > 0 for class {self.name}")
        if self.pa_efficiency is not None and not 0 < self.pa_efficiency <= 1:
            raise ValueError("pa_efficiency must be in (0, 1]")


STATION_CLASSES: Mapping[str, StationClass] = MappingProxyType(
    {
        "macro": StationClass("macro", 47.0, 1000.0, 50.0),
        "micro": StationClass("micro", 38.0, 144.0),
        "pico": StationClass("pico", 21.0, 14.7),
        "femto": StationClass("femto", 17.0, 10.4, 15.0),
    }
)


def get_station_class(name: str) -> StationClass:
    try:
        return STATION_CLASSES[name]
    except KeyError as exc:
        raise ValueError(f"Unknown station class {name!r} (expected one of {list(STATION_CLASSES)})") from exc


@dataclass(frozen=True)
class DensificationParams:
    gamma: float = settings.power.gamma
    s: float = settings.power.s
    base_tx_power_w: float = settings.power.base_tx_power_w
    pa_efficiency: float = settings.power.pa_efficiency

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.s < 0:
            raise ValueError(f"s must be >= 0, got {self.s}")
        if not self.base_tx_power_w > 0:
            raise ValueError("base_tx_power_w must be > 0")
        if not 0 < self.pa_efficiency <= 1:
            raise ValueError("pa_efficiency must be in (0, 1]")


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def tx_power_ratio(n: int, gamma: float) -> float:
    """P_tx(single station) / P_tx(n^2-station network) = n^(gamma - 2)."""
    _check_n(n)
    return float(n) ** (gamma - 2.0)


def net_power_w(n: int, p: DensificationParams) -> float:
    """Network power P_tx^R * (n^(2-gamma) + s * n^2)."""
    _check_n(n)
    return p.base_tx_power_w * (float(n) ** (2.0 - p.gamma) + p.s * n * n)


def net_power_ratio(n: int, p: DensificationParams) -> float:
    return net_power_w(n, p) / p.base_tx_power_w


def optimal_densification(p: DensificationParams, n_max: int = settings.power.n_max):
    """Integer n in [1, n_max] with the lowest net power; ties go to the smaller n."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    best_n, best_w = 1, net_power_w(1, p)
    for n in range(2, n_max + 1):
        w = net_power_w(n, p)
        if w < best_w:
            best_n, best_w = n, w
    return best_n, best_w


def continuous_optimum(p: DensificationParams) -> Optional[float]:
    """Stationary point ((gamma - 2) / (2 s))^(1/gamma); None when no interior minimum exists."""
    if p.s <= 0 or p.gamma <= 2:
        return None
    return ((p.gamma - 2.0) / (2.0 * p.s)) ** (1.0 / p.gamma)


def crossover_n(p: DensificationParams, n_max: int = settings.power.n_max) -> Optional[int]:
    """Smallest n >= 2 whose net power is back at or above the single-station value."""
    single = net_power_w(1, p)
    for n in range(2, n_max + 1):
        if net_power_w(n, p) >= single:
            return n
    return None


@dataclass(frozen=True)
class DensificationReport:
    gamma: float
    s: float
    n_max: int
    n_star: int
    power_w: float
    net_ratio: float
    continuous_n_star: Optional[float]
    crossover_n: Optional[int]
    table_version: str = TABLE_VERSION


def densification_report(p: DensificationParams, n_max: int = settings.power.n_max) -> DensificationReport:
    n_star, power_w = optimal_densification(p, n_max)
    return DensificationReport(
        gamma=p.gamma,
        s=p.s,
        n_max=n_max,
        n_star=n_star,
        power_w=power_w,
        net_ratio=power_w / p.base_tx_power_w,
        continuous_n_star=continuous_optimum(p),
        crossover_n=crossover_n(p, n_max),
    )


def pa_input_power_w(tx_out_w: float, efficiency: float) -> float:
    """Power drawn by a PA delivering tx_out_w at the given efficiency."""
    if not tx_out_w > 0:
        raise ValueError(f"tx_out_w must be > 0, got {tx_out_w}")
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must be in (0, 1], got {efficiency}")
    return tx_out_w / efficiency


def class_pa_input_power_w(station_class: StationClass, efficiency: Optional[float] = None) -> float:
    """PA input power at the class transmit power; an explicit efficiency wins, then the class value, then the global default."""
    eff = efficiency or station_class.pa_efficiency or settings.power.pa_efficiency
    return pa_input_power_w(dbm_to_watts(station_class.tx_power_dbm), eff)


def network_total_power_w(station_class: StationClass, count: int) -> float:
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    return count * station_class.total_power_w


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    if not p_w > 0:
        raise ValueError(f"power must be > 0 W, got {p_w}")
    return 10.0 * math.log10(p_w) + 30.0
