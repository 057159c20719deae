"""
User-side uplink power for a deployed network.

Users are dropped uniformly over the green region, attach to the station
with the strongest downlink, and need enough uplink power to arrive at that
station's sensitivity plus an SNR margin. Uplink and downlink path loss are
taken to be equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.core.errors import EmptyRegionError, GridMismatchError, UncoveredUserError
from src.core.propagation import CoverageMap
from src.core.scene import CellMask
from src.logging import get_logger

logger = get_logger(__name__)

PERCENTILES = (5, 25, 50, 75, 95)


def _default_thresholds() -> Dict[str, float]:
    return {name: settings.placement.coverage_threshold_dbm for name in settings.ue.sensitivity_dbm}


@dataclass(frozen=True)
class UeSimConfig:
    num_users: int = settings.ue.num_users
    sensitivity_dbm: Dict[str, float] = field(default_factory=lambda: dict(settings.ue.sensitivity_dbm))
    snr_margin_db: float = settings.ue.snr_margin_db
    max_ue_power_dbm: float = settings.ue.max_ue_power_dbm
    seed: int = 0
    # Downlink level that puts a cell in the green region, per serving class.
    downlink_threshold_dbm: Dict[str, float] = field(default_factory=_default_thresholds)

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError(f"num_users must be >= 1, got {self.num_users}")

    def sensitivity_for(self, station_class: str) -> float:
        try:
            return self.sensitivity_dbm[station_class]
        except KeyError as exc:
            raise ValueError(f"no uplink sensitivity configured for class {station_class!r}") from exc

    def threshold_for(self, station_class: str) -> float:
        return self.downlink_threshold_dbm.get(station_class, settings.placement.coverage_threshold_dbm)


@dataclass(frozen=True)
class UeSample:
    position: Tuple[float, float]
    serving_station: Optional[int]
    downlink_rx_dbm: float
    required_tx_dbm: float
    feasible: bool


@dataclass(frozen=True)
class TxPowerStats:
    mean_dbm: float
    median_dbm: float
    percentiles: Dict[int, float]
    cdf: np.ndarray = field(repr=False)
    infeasible_fraction: float
    count: int

    def as_record(self) -> Dict:
        return {
            "mean_dbm": self.mean_dbm,
            "median_dbm": self.median_dbm,
            "percentiles": {f"p{k}": v for k, v in self.percentiles.items()},
            "infeasible_fraction": self.infeasible_fraction,
            "count": self.count,
        }


@dataclass(frozen=True, eq=False)
class UserEvaluation:
    """Per-user results for one network, as parallel arrays."""

    positions: np.ndarray
    serving: np.ndarray
    downlink_rx_dbm: np.ndarray
    required_tx_dbm: np.ndarray
    feasible: np.ndarray

    def sample(self, k: int) -> UeSample:
        return UeSample(
            position=(float(self.positions[k, 0]), float(self.positions[k, 1])),
            serving_station=int(self.serving[k]),
            downlink_rx_dbm=float(self.downlink_rx_dbm[k]),
            required_tx_dbm=float(self.required_tx_dbm[k]),
            feasible=bool(self.feasible[k]),
        )


def _check_maps(maps: Sequence[CoverageMap], mask: CellMask) -> None:
    if not maps:
        raise ValueError("a network needs at least one coverage map")
    for cmap in maps:
        if not mask.same_grid(cmap.grid):
            raise GridMismatchError("all coverage maps must share the mask's grid")


def green_region(maps: Sequence[CoverageMap], mask: CellMask, cfg: UeSimConfig) -> np.ndarray:
    """Outdoor cells where some station's downlink meets its own class threshold."""
    _check_maps(maps, mask)
    green = np.zeros(mask.grid.shape, dtype=bool)
    for cmap in maps:
        green |= cmap.rx_power_dbm >= cfg.threshold_for(cmap.tx.station_class)
    return green & mask.outdoor


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def users_in_region(region: np.ndarray, mask: CellMask, num_users: int, seed: int) -> np.ndarray:
    """(num_users, 2) positions uniform over the region's cells, uniform within each cell."""
    cells = np.flatnonzero(region)
    if cells.size == 0:
        raise EmptyRegionError("no cell qualifies for user placement")
    rng = _rng(seed)
    picks = cells[rng.integers(0, cells.size, size=num_users)]
    # Offsets stay strictly inside the cell so each user maps back to its own cell.
    offsets = np.minimum(rng.random((num_users, 2)), 1.0 - 1e-9)
    i, j = np.unravel_index(picks, mask.grid.shape)
    cs = mask.grid.spec.cell_size_m
    x_min, y_min, x_max, y_max = mask.grid.bounds
    xs = np.minimum(x_min + (i + offsets[:, 0]) * cs, x_max)
    ys = np.minimum(y_min + (j + offsets[:, 1]) * cs, y_max)
    return np.column_stack([xs, ys])


def populate_users(maps: Sequence[CoverageMap], mask: CellMask, cfg: UeSimConfig) -> np.ndarray:
    positions = users_in_region(green_region(maps, mask, cfg), mask, cfg.num_users, cfg.seed)
    logger.info("Placed %d users over %d stations' green region", len(positions), len(maps))
    return positions


def evaluate_users(users: np.ndarray, maps: Sequence[CoverageMap], cfg: UeSimConfig) -> UserEvaluation:
    """Best-server selection and required uplink power for every user at once."""
    if not maps:
        raise ValueError("a network needs at least one coverage map")
    users = np.atleast_2d(np.asarray(users, dtype=float))
    i, j = maps[0].grid.cell_of(users[:, 0], users[:, 1])
    rx = np.stack([cmap.rx_power_dbm[i, j] for cmap in maps])
    serving = np.argmax(rx, axis=0)  # first maximum = lowest station index
    cols = np.arange(users.shape[0])
    best_rx = rx[serving, cols]
    uncovered = np.isneginf(best_rx)
    if uncovered.any():
        k = int(np.flatnonzero(uncovered)[0])
        raise UncoveredUserError(f"user at {tuple(users[k])} is not reached by any station")

    loss = np.stack([cmap.path_loss_db[i, j] for cmap in maps])[serving, cols]
    sens = np.array([cfg.sensitivity_for(cmap.tx.station_class) for cmap in maps])[serving]
    required = sens + cfg.snr_margin_db + loss
    return UserEvaluation(
        positions=users,
        serving=serving,
        downlink_rx_dbm=best_rx,
        required_tx_dbm=required,
        feasible=required <= cfg.max_ue_power_dbm,
    )


def required_uplink_power(user: Tuple[float, float], maps: Sequence[CoverageMap], cfg: UeSimConfig) -> UeSample:
    return evaluate_users(np.array([user], dtype=float), maps, cfg).sample(0)


def tx_power_stats(required_tx_dbm: np.ndarray, feasible: np.ndarray) -> TxPowerStats:
    """Summary over feasible users; infeasible ones only count toward infeasible_fraction."""
    total = int(required_tx_dbm.size)
    values = np.sort(required_tx_dbm[feasible])
    if values.size:
        pct = np.percentile(values, PERCENTILES)
        mean, median = float(values.mean()), float(np.median(values))
    else:
        pct = [float("nan")] * len(PERCENTILES)
        mean = median = float("nan")
    return TxPowerStats(
        mean_dbm=mean,
        median_dbm=median,
        percentiles={p: float(v) for p, v in zip(PERCENTILES, pct)},
        cdf=values,
        infeasible_fraction=float(total - values.size) / total if total else 0.0,
        count=total,
    )


@dataclass(frozen=True, eq=False)
class NetworkComparison:
    users: np.ndarray
    result_a: UserEvaluation
    result_b: UserEvaluation
    stats_a: TxPowerStats
    stats_b: TxPowerStats
    # stats_a.mean_dbm - stats_b.mean_dbm, each mean over that network's feasible users.
    mean_delta_db: float
    # Mean per-user difference over users feasible in both networks.
    paired_delta_db: float


def compare_networks_detailed(
    net_a: Sequence[CoverageMap], net_b: Sequence[CoverageMap], mask: CellMask, cfg: UeSimConfig
) -> NetworkComparison:
    """Paired comparison: one user drop over the intersection of both green regions."""
    if not net_a or not net_b:
        raise ValueError("both networks need at least one station")
    region = green_region(net_a, mask, cfg) & green_region(net_b, mask, cfg)
    if not region.any():
        raise EmptyRegionError("the two networks' green regions do not intersect")
    users = users_in_region(region, mask, cfg.num_users, cfg.seed)
    result_a = evaluate_users(users, net_a, cfg)
    result_b = evaluate_users(users, net_b, cfg)
    stats_a = tx_power_stats(result_a.required_tx_dbm, result_a.feasible)
    stats_b = tx_power_stats(result_b.required_tx_dbm, result_b.feasible)

    delta = stats_a.mean_dbm - stats_b.mean_dbm
    both = result_a.feasible & result_b.feasible
    if both.any():
        paired = float(np.mean(result_a.required_tx_dbm[both] - result_b.required_tx_dbm[both]))
    else:
        paired = float("nan")
    logger.info(
        "UE comparison: %d users, %d stations vs %d, mean delta %.2f dB (paired %.2f dB)",
        len(users), len(net_a), len(net_b), delta, paired,
    )
    return NetworkComparison(
        users=users,
        result_a=result_a,
        result_b=result_b,
        stats_a=stats_a,
        stats_b=stats_b,
        mean_delta_db=delta,
        paired_delta_db=paired,
    )


def compare_networks(
    net_a: Sequence[CoverageMap], net_b: Sequence[CoverageMap], mask: CellMask, cfg: UeSimConfig
) -> Tuple[TxPowerStats, TxPowerStats, float]:
    result = compare_networks_detailed(net_a, net_b, mask, cfg)
    return result.stats_a, result.stats_b, result.mean_delta_db
