"""
Path-loss exponent (PLE) extraction.

Fits PL_dB = K_dB + 10 * gamma * log10(d) by ordinary least squares and
maps the fitted exponent over candidate transmitter locations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.core.errors import InsufficientSamplesError
from src.core.propagation import (
    CoverageMap,
    RayTracerConfig,
    Transmitter,
    free_space_path_loss_db,
    sector_contains,
)
from src.core.scene import CellMask, GridSpec, Scene, rasterize
from src.logging import get_logger
from src.ports.output.propagation import PropagationPort

logger = get_logger(__name__)

STATUS_OK = "ok"
STATUS_INSUFFICIENT = "insufficient data"
STATUS_IN_BUILDING = "inside building"
STATUS_OUT_OF_BOUNDS = "outside bounds"


@dataclass(frozen=True)
class PathLossSample:
    distance_m: float
    path_loss_db: float

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be > 0, got {self.distance_m}")


@dataclass(frozen=True)
class PathLossFit:
    k_db: float
    gamma: float
    rmse_db: float
    sample_count: int

    def predict(self, distance_m) -> np.ndarray:
        return self.k_db + 10.0 * self.gamma * np.log10(np.asarray(distance_m, dtype=float))

    def as_record(self) -> Dict[str, float]:
        return {"k_db": self.k_db, "gamma": self.gamma, "rmse_db": self.rmse_db, "n": self.sample_count}


def _as_arrays(samples: Sequence[PathLossSample]) -> Tuple[np.ndarray, np.ndarray]:
    d = np.fromiter((s.distance_m for s in samples), dtype=float, count=len(samples))
    pl = np.fromiter((s.path_loss_db for s in samples), dtype=float, count=len(samples))
    return d, pl


def fit_ple(samples: Sequence[PathLossSample]) -> PathLossFit:
    """Closed-form least-squares fit in (log10 d, PL_dB)."""
    if len(samples) < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {len(samples)}")
    d, pl = _as_arrays(samples)
    if np.unique(d).size < 2:
        raise InsufficientSamplesError("all sample distances are equal; exponent is undetermined")

    x = np.log10(d)
    x_mean, y_mean = x.mean(), pl.mean()
    xc = x - x_mean
    slope = float(np.dot(xc, pl - y_mean) / np.dot(xc, xc))
    k_db = float(y_mean - slope * x_mean)
    residual = pl - (k_db + slope * x)
    rmse = float(np.sqrt(np.mean(residual**2)))
    return PathLossFit(k_db=k_db, gamma=slope / 10.0, rmse_db=rmse, sample_count=len(samples))


def samples_from_coverage(
    cmap: CoverageMap,
    mask: CellMask,
    max_radius_m: float,
    min_distance_m: float = settings.ple.min_distance_m,
    sector_start_deg: float = 0.0,
    sector_width_deg: float = 360.0,
) -> List[PathLossSample]:
    """One sample per reached outdoor cell with 2D distance in [min_distance, max_radius]."""
    xs, ys = cmap.grid.centers()
    dx, dy = xs - cmap.tx.position[0], ys - cmap.tx.position[1]
    horiz = np.hypot(dx, dy)
    keep = (
        cmap.reached
        & mask.outdoor
        & (horiz >= min_distance_m)
        & (horiz <= max_radius_m)
        & sector_contains(dx, dy, sector_start_deg, sector_width_deg)
    )
    dist = cmap.distances_3d()[keep]
    loss = cmap.path_loss_db[keep]
    return [PathLossSample(float(d), float(pl)) for d, pl in zip(dist, loss)]


# Ericsson 9999 coefficient sets (a0, a1, a2, a3).
ERICSSON_ENVIRONMENTS: Dict[str, Tuple[float, float, float, float]] = {
    "urban": (36.2, 30.2, -12.0, 0.1),
    "suburban": (43.2, 68.93, -12.0, 0.1),
    "rural": (45.95, 100.6, -12.0, 0.1),
}


def ericsson_path_loss_db(d_m, f_hz: float, tx_height_m: float, rx_height_m: float, environment: str = "urban"):
    """Ericsson empirical urban model, the usual sanity reference for simulated city path loss."""
    try:
        a0, a1, a2, a3 = ERICSSON_ENVIRONMENTS[environment]
    except KeyError as exc:
        raise ValueError(f"unknown environment {environment!r}") from exc
    d_km = np.asarray(d_m, dtype=float) / 1000.0
    if np.any(d_km <= 0) or f_hz <= 0 or tx_height_m <= 0 or rx_height_m <= 0:
        raise ValueError("Ericsson model needs positive distance, frequency and heights")
    f_mhz = f_hz / 1e6
    log_hb = math.log10(tx_height_m)
    g_f = 44.49 * math.log10(f_mhz) - 4.78 * math.log10(f_mhz) ** 2
    loss = (
        a0
        + a1 * np.log10(d_km)
        + a2 * log_hb
        + a3 * log_hb * np.log10(d_km)
        - 3.2 * math.log10(11.75 * rx_height_m) ** 2
        + g_f
    )
    return float(loss) if loss.ndim == 0 else loss


def reference_rmse(
    samples: Sequence[PathLossSample], tx: Transmitter, rx_height_m: float
) -> Dict[str, Optional[float]]:
    """RMSE of the samples against the Friis and Ericsson-urban curves."""
    if not samples:
        return {"friis_rmse_db": None, "ericsson_rmse_db": None}
    d, pl = _as_arrays(samples)
    friis = free_space_path_loss_db(d, tx.frequency_hz)
    ericsson = ericsson_path_loss_db(d, tx.frequency_hz, tx.height_m, max(rx_height_m, 1e-3))
    return {
        "friis_rmse_db": float(np.sqrt(np.mean((pl - friis) ** 2))),
        "ericsson_rmse_db": float(np.sqrt(np.mean((pl - ericsson) ** 2))),
    }


@dataclass(frozen=True, eq=False)
class PleHeatmap:
    positions: Tuple[Tuple[float, float], ...]
    gammas: np.ndarray = field(repr=False)
    statuses: Tuple[str, ...]
    max_radius_m: float
    min_samples: int
    lattice_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.gammas.setflags(write=False)

    def mean_gamma(self, predicate) -> float:
        values = [g for (p, g) in zip(self.positions, self.gammas) if predicate(p) and not np.isnan(g)]
        return float(np.mean(values)) if values else float("nan")


def ple_heatmap(
    engine: PropagationPort,
    scene: Scene,
    grid: GridSpec,
    candidates: Sequence[Tuple[float, float]],
    tx_template: Transmitter,
    cfg: RayTracerConfig,
    max_radius_m: float = settings.ple.max_radius_m,
    min_samples: int = settings.ple.min_samples,
    min_distance_m: float = settings.ple.min_distance_m,
    threads: int = 1,
    lattice_shape: Optional[Tuple[int, int]] = None,
) -> PleHeatmap:
    """Fit gamma with the transmitter at every candidate; failures are recorded per entry."""
    if not candidates:
        raise ValueError("ple_heatmap needs at least one candidate location")
    mask = rasterize(scene, grid)

    def evaluate(position: Tuple[float, float]) -> Tuple[float, str]:
        if not scene.contains(*position):
            return float("nan"), STATUS_OUT_OF_BOUNDS
        if not mask.is_outdoor(*position):
            return float("nan"), STATUS_IN_BUILDING
        cmap = engine.compute_coverage_map(scene, grid, tx_template.at(position), cfg, mask)
        samples = samples_from_coverage(cmap, mask, max_radius_m, min_distance_m)
        if len(samples) < min_samples:
            return float("nan"), STATUS_INSUFFICIENT
        try:
            return fit_ple(samples).gamma, STATUS_OK
        except InsufficientSamplesError:
            return float("nan"), STATUS_INSUFFICIENT

    positions = [(float(x), float(y)) for x, y in candidates]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, positions))
    else:
        results = [evaluate(p) for p in positions]

    gammas = np.array([g for g, _ in results], dtype=float)
    statuses = tuple(s for _, s in results)
    logger.info(
        "PLE heatmap: %d candidates, %d fitted, radius %.0f m",
        len(positions), statuses.count(STATUS_OK), max_radius_m,
    )
    return PleHeatmap(
        positions=tuple(positions),
        gammas=gammas,
        statuses=statuses,
        max_radius_m=max_radius_m,
        min_samples=min_samples,
        lattice_shape=lattice_shape,
    )
