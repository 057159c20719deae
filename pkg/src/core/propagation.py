"""
Coverage-map domain types and the set algebra built on them.

The ray-launching engine that fills a CoverageMap lives behind
`PropagationPort` (see src/adapters/output/propagation).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Tuple

import numpy as np

from src.config import settings
from src.core.errors import DegenerateSceneError, GridMismatchError
from src.core.scene import CellMask, RasterGrid

# 20*log10(4*pi/c) for d in meters and f in hertz.
FRIIS_CONSTANT_DB = 147.55


def free_space_path_loss_db(d_m, f_hz):
    """Friis loss for isotropic antennas: 20 log10 d + 20 log10 f - 147.55 dB. Accepts arrays."""
    d = np.asarray(d_m, dtype=float)
    f = np.asarray(f_hz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("free-space path loss needs d_m > 0 and f_hz > 0")
    loss = 20.0 * np.log10(d) + 20.0 * np.log10(f) - FRIIS_CONSTANT_DB
    return float(loss) if loss.ndim == 0 else loss


@dataclass(frozen=True)
class Transmitter:
    position: Tuple[float, float]
    height_m: float = settings.station.height_m
    tx_power_dbm: float = settings.station.tx_power_dbm
    frequency_hz: float = settings.station.frequency_hz
    station_class: str = settings.station.station_class

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if not self.height_m > 0:
            raise ValueError(f"height_m must be > 0, got {self.height_m}")
        if not self.frequency_hz > 0:
            raise ValueError(f"frequency_hz must be > 0, got {self.frequency_hz}")

    def at(self, position: Tuple[float, float]) -> "Transmitter":
        return replace(self, position=position)


@dataclass(frozen=True)
class RayTracerConfig:
    num_samples: int = settings.tracer.num_samples
    max_depth: int = settings.tracer.max_depth
    reflection_loss_db: float = settings.tracer.reflection_loss_db
    max_range_m: float = settings.tracer.max_range_m
    seed: int = 0
    stratified: bool = settings.tracer.stratified
    direct_path: bool = settings.tracer.direct_path
    sector_start_deg: float = 0.0
    sector_width_deg: float = 360.0
    min_distance_m: float = settings.tracer.min_distance_m

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.reflection_loss_db < 0:
            raise ValueError("reflection_loss_db must be >= 0")
        if not self.max_range_m > 0:
            raise ValueError("max_range_m must be > 0")
        if not 0 < self.sector_width_deg <= 360:
            raise ValueError("sector_width_deg must be in (0, 360]")
        if not self.min_distance_m > 0:
            raise ValueError("min_distance_m must be > 0")


@dataclass(frozen=True, eq=False)
class CoverageMap:
    """Per-cell best-path loss for one transmitter; NaN marks an unreached cell."""

    grid: RasterGrid
    tx: Transmitter
    path_loss_db: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.path_loss_db.shape != self.grid.shape:
            raise GridMismatchError(
                f"path loss shape {self.path_loss_db.shape} does not match grid {self.grid.shape}"
            )
        self.path_loss_db.setflags(write=False)

    @property
    def reached(self) -> np.ndarray:
        return ~np.isnan(self.path_loss_db)

    @property
    def rx_power_dbm(self) -> np.ndarray:
        """tx_power - path_loss; -inf where unreached."""
        with np.errstate(invalid="ignore"):
            rx = self.tx.tx_power_dbm - self.path_loss_db
        return np.where(self.reached, rx, -np.inf)

    def distances_3d(self) -> np.ndarray:
        xs, ys = self.grid.centers()
        dh = self.tx.height_m - self.grid.spec.receiver_height_m
        return np.sqrt((xs - self.tx.position[0]) ** 2 + (ys - self.tx.position[1]) ** 2 + dh**2)

    def bit_identical(self, other: "CoverageMap") -> bool:
        return (
            self.grid == other.grid
            and self.tx == other.tx
            and self.path_loss_db.tobytes() == other.path_loss_db.tobytes()
        )


@dataclass(frozen=True, eq=False)
class CoverageSet:
    grid: RasterGrid
    covered: np.ndarray = field(repr=False)
    threshold_dbm: float = settings.placement.coverage_threshold_dbm

    def __post_init__(self):
        self.covered.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.covered.sum())


def _check_grid(grid: RasterGrid, mask: CellMask) -> None:
    if not mask.same_grid(grid):
        raise GridMismatchError("coverage data and cell mask use different grids")


def coverage_set(cmap: CoverageMap, mask: CellMask, threshold_dbm: float) -> CoverageSet:
    """Outdoor cells whose received power meets the threshold."""
    _check_grid(cmap.grid, mask)
    covered = (cmap.rx_power_dbm >= threshold_dbm) & mask.outdoor
    return CoverageSet(grid=cmap.grid, covered=covered, threshold_dbm=float(threshold_dbm))


def union_of(sets: Sequence[CoverageSet], mask: CellMask) -> np.ndarray:
    union = np.zeros(mask.grid.shape, dtype=bool)
    for s in sets:
        _check_grid(s.grid, mask)
        union |= s.covered
    return union & mask.outdoor


def coverage_ratio(sets: Sequence[CoverageSet], mask: CellMask) -> float:
    """|union of covered cells| / |outdoor cells|."""
    outdoor = mask.outdoor_count
    if outdoor == 0:
        raise DegenerateSceneError("scene has no outdoor cells")
    if not sets:
        return 0.0
    return float(union_of(sets, mask).sum()) / outdoor


def overlap_and_blind(
    sets: Sequence[CoverageSet], reference: CoverageSet, mask: CellMask
) -> Tuple[float, float]:
    """Fractions of outdoor cells covered twice or more, and covered by reference but not by sets."""
    outdoor = mask.outdoor_count
    if outdoor == 0:
        raise DegenerateSceneError("scene has no outdoor cells")
    _check_grid(reference.grid, mask)
    counts = np.zeros(mask.grid.shape, dtype=np.int32)
    for s in sets:
        _check_grid(s.grid, mask)
        counts += s.covered
    counts[~mask.outdoor] = 0
    overlap = float((counts >= 2).sum()) / outdoor
    blind = float((reference.covered & mask.outdoor & (counts == 0)).sum()) / outdoor
    return overlap, blind


def sector_contains(
    dx: np.ndarray, dy: np.ndarray, start_deg: float, width_deg: float
) -> np.ndarray:
    """Whether the azimuth of (dx, dy) lies in [start, start + width) degrees."""
    if width_deg >= 360.0:
        return np.ones(np.shape(dx), dtype=bool)
    az = np.degrees(np.arctan2(dy, dx))
    return np.mod(az - start_deg, 360.0) < width_deg
