"""
Tabular and image views of module outputs, plus the per-run report record.

Everything here is a pure transformation into pandas frames, uint8 pixel
arrays or plain dicts; writing them is the artifact adapter's job.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from src.config import settings
from src.core.placement import ClassSweepRow, PlacementSolution
from src.core.ple import STATUS_OK, PathLossSample, PleHeatmap
from src.core.power import (
    STATION_CLASSES,
    TABLE_VERSION,
    DensificationParams,
    get_station_class,
    net_power_ratio,
    network_total_power_w,
)
from src.core.propagation import CoverageMap, CoverageSet
from src.core.scene import CellMask
from src.core.ue import TxPowerStats, UserEvaluation

# Overlay palette.
BUILDING_LEVEL = 0
BLIND_LEVEL = 64
COVERED_LEVEL = 128
OVERLAP_LEVEL = 224
EMPTY_LEVEL = 255


def coverage_frame(cmap: CoverageMap, mask: CellMask) -> pd.DataFrame:
    """One row per cell, i-major: i,j,x_center,y_center,path_loss_db,rx_power_dbm,state."""
    nx, ny = cmap.grid.shape
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    xs, ys = cmap.grid.centers()
    reached = cmap.reached
    state = np.where(mask.building, "building", np.where(reached, "reached", "unreached"))
    rx = np.where(reached, cmap.rx_power_dbm, np.nan)
    return pd.DataFrame(
        {
            "i": ii.ravel(),
            "j": jj.ravel(),
            "x_center": xs.ravel(),
            "y_center": ys.ravel(),
            "path_loss_db": cmap.path_loss_db.ravel(),
            "rx_power_dbm": rx.ravel(),
            "state": state.ravel(),
        }
    )


def _to_image(cells: np.ndarray) -> np.ndarray:
    """(nx, ny) cell array to (rows, cols) image with north up."""
    return np.ascontiguousarray(cells.T[::-1], dtype=np.uint8)


def _scale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return 1 + np.rint(254.0 * t)


def coverage_pixels(
    cmap: CoverageMap,
    mask: CellMask,
    floor_dbm: float = settings.export.pgm_floor_dbm,
    ceiling_dbm: float = settings.export.pgm_ceiling_dbm,
) -> np.ndarray:
    """Received power mapped to 1..255 between floor and ceiling; unreached and building cells are 0."""
    if not ceiling_dbm > floor_dbm:
        raise ValueError("PGM ceiling must exceed the floor")
    levels = np.zeros(cmap.grid.shape)
    reached = cmap.reached & mask.outdoor
    levels[reached] = _scale(cmap.rx_power_dbm[reached], floor_dbm, ceiling_dbm)
    return _to_image(levels)


def overlay_pixels(sets: Sequence[CoverageSet], reference: CoverageSet, mask: CellMask) -> np.ndarray:
    """Covered once gray, overlap light, blind (reference only) dark, buildings black."""
    counts = np.zeros(mask.grid.shape, dtype=np.int32)
    for s in sets:
        counts += s.covered
    levels = np.full(mask.grid.shape, EMPTY_LEVEL, dtype=np.uint8)
    levels[counts == 1] = COVERED_LEVEL
    levels[counts >= 2] = OVERLAP_LEVEL
    levels[reference.covered & (counts == 0)] = BLIND_LEVEL
    levels[mask.building] = BUILDING_LEVEL
    return _to_image(levels)


def heatmap_frame(heatmap: PleHeatmap) -> pd.DataFrame:
    xs, ys = zip(*heatmap.positions)
    return pd.DataFrame({"x": xs, "y": ys, "gamma": heatmap.gammas, "status": heatmap.statuses})


def heatmap_pixels(
    heatmap: PleHeatmap,
    gamma_floor: float = settings.ple.gamma_floor,
    gamma_ceiling: float = settings.ple.gamma_ceiling,
) -> np.ndarray:
    """Lattice image of gamma in 1..255 over [floor, ceiling]; failed entries are 0."""
    if heatmap.lattice_shape is None:
        raise ValueError("heatmap has no lattice shape to render")
    kx, ky = heatmap.lattice_shape
    if kx * ky != len(heatmap.positions):
        raise ValueError("lattice shape does not match the candidate count")
    ok = np.array([s == STATUS_OK for s in heatmap.statuses])
    levels = np.zeros(len(ok))
    levels[ok] = _scale(heatmap.gammas[ok], gamma_floor, gamma_ceiling)
    # Candidates are row-major with y rows, so reshape gives (ky, kx).
    return np.ascontiguousarray(levels.reshape(ky, kx)[::-1], dtype=np.uint8)


def ple_samples_frame(samples: Iterable[PathLossSample]) -> pd.DataFrame:
    rows = [(s.distance_m, s.path_loss_db) for s in samples]
    return pd.DataFrame(rows, columns=["distance_m", "path_loss_db"])


def ratio_curve_frame(solution: PlacementSolution) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "step": np.arange(1, solution.n + 1),
            "ratio": list(solution.ratio_curve),
            "x": [p[0] for p in solution.sites],
            "y": [p[1] for p in solution.sites],
        }
    )


def trajectory_frame(solution: PlacementSolution) -> pd.DataFrame:
    return pd.DataFrame(list(solution.trajectory), columns=["k", "stations", "ratio"])


def class_sweep_frame(rows: Sequence[ClassSweepRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows])


def net_ratio_frame(params: DensificationParams, n_max: int) -> pd.DataFrame:
    """`n,net_ratio` for n = 1..n_max."""
    ns = np.arange(1, n_max + 1)
    return pd.DataFrame({"n": ns, "net_ratio": [net_power_ratio(int(n), params) for n in ns]})


def class_total_frame(counts: Mapping[str, int]) -> pd.DataFrame:
    """Network totals per (class, count) with the ratio against one macro station."""
    macro_total = STATION_CLASSES["macro"].total_power_w
    rows = []
    for name, count in counts.items():
        total = network_total_power_w(get_station_class(name), int(count))
        rows.append({"class": name, "count": int(count), "total_w": total, "ratio_vs_single_macro": total / macro_total})
    return pd.DataFrame(rows, columns=["class", "count", "total_w", "ratio_vs_single_macro"])


def ue_samples_frame(result: UserEvaluation) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "x": result.positions[:, 0],
            "y": result.positions[:, 1],
            "station": result.serving,
            "required_tx_dbm": result.required_tx_dbm,
            "feasible": result.feasible.astype(int),
        }
    )


def cdf_frame(stats: TxPowerStats) -> pd.DataFrame:
    """Empirical CDF over all users; infeasible mass is left off, so it tops out at 1 - infeasible_fraction."""
    k = np.arange(1, stats.cdf.size + 1)
    return pd.DataFrame({"required_tx_dbm": stats.cdf, "cdf": k / max(stats.count, 1)})


@dataclass
class RunReport:
    command: str
    config: Dict[str, Any]
    outputs: Dict[str, Any] = field(default_factory=dict)
    timings_s: Dict[str, float] = field(default_factory=dict)
    version: str = settings.version
    table_version: str = TABLE_VERSION
    status: str = "ok"
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings_s[name] = round(time.perf_counter() - start, 6)

    def as_dict(self) -> Dict[str, Any]:
        return _finite(asdict(self))


def _finite(value: Any) -> Any:
    """NaN and infinities become None so the report stays strict JSON."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value
