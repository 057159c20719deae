"""Synthetic scene generators for experiments and tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from shapely.geometry import box

from src.core.errors import SceneGenerationError
from src.core.scene import Building, Scene
from src.logging import get_logger

logger = get_logger(__name__)

SCENE_KINDS = ("uniform-city", "asymmetric-city", "empty")

# Share of a half-plane that density=1.0 asks the asymmetric generator to build over.
_MAX_HALF_COVERAGE = 0.35


@dataclass(frozen=True)
class SyntheticParams:
    width_m: float = 300.0
    depth_m: float = 300.0
    density: float = 0.5
    min_height_m: float = 10.0
    max_height_m: float = 40.0
    lot_size_m: float = 40.0
    street_m: float = 10.0
    min_footprint_m: float = 10.0
    max_footprint_m: float = 28.0
    left_fraction: float = 0.15
    max_retries: int = 2000

    def __post_init__(self):
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must be in [0, 1], got {self.density}")
        if not 0 < self.min_height_m <= self.max_height_m:
            raise ValueError("height range must be positive and ordered")
        if not 0 < self.min_footprint_m <= self.max_footprint_m:
            raise ValueError("footprint range must be positive and ordered")
        if not 0.0 <= self.left_fraction <= 0.2:
            raise ValueError("left_fraction must be in [0, 0.2]")
        if self.width_m <= 0 or self.depth_m <= 0:
            raise ValueError("scene extent must be positive")


def generate_synthetic_scene(kind: str, params: SyntheticParams | None = None, seed: int = 0) -> Scene:
    """Deterministic synthetic city for a given (kind, params, seed)."""
    params = params or SyntheticParams()
    bounds = (0.0, 0.0, params.width_m, params.depth_m)
    rng = np.random.default_rng(seed)

    if kind == "empty":
        rects: List[Tuple[float, float, float, float, float]] = []
    elif kind == "uniform-city":
        rects = _uniform_city(params, rng)
    elif kind == "asymmetric-city":
        rects = _asymmetric_city(params, rng)
    else:
        raise ValueError(f"Unknown scene kind: {kind} (expected one of {SCENE_KINDS})")

    buildings = tuple(
        Building(footprint=((x0, y0), (x1, y0), (x1, y1), (x0, y1)), height_m=h)
        for x0, y0, x1, y1, h in rects
    )
    logger.info("Generated %s scene (seed=%d): %d buildings", kind, seed, len(buildings))
    return Scene(bounds=bounds, buildings=buildings, name=f"{kind}-{seed}")


def _height(params: SyntheticParams, rng: np.random.Generator) -> float:
    return round(float(rng.uniform(params.min_height_m, params.max_height_m)), 2)


def _uniform_city(params: SyntheticParams, rng: np.random.Generator):
    """Buildings on a jittered lot grid; each footprint stays inside its lot minus half a street."""
    usable = params.lot_size_m - params.street_m
    if usable < params.min_footprint_m:
        raise SceneGenerationError(
            f"lot {params.lot_size_m} m minus street {params.street_m} m cannot fit a "
            f"{params.min_footprint_m} m footprint"
        )
    nx = int(params.width_m // params.lot_size_m)
    ny = int(params.depth_m // params.lot_size_m)
    lots = nx * ny
    count = int(round(params.density * lots))
    if count == 0:
        return []
    chosen = np.sort(rng.choice(lots, size=count, replace=False))

    # Center the lot lattice inside the bounds.
    off_x = (params.width_m - nx * params.lot_size_m) / 2.0
    off_y = (params.depth_m - ny * params.lot_size_m) / 2.0
    max_fp = min(params.max_footprint_m, usable)

    rects = []
    for lot in chosen:
        li, lj = int(lot % nx), int(lot // nx)
        cx = off_x + (li + 0.5) * params.lot_size_m
        cy = off_y + (lj + 0.5) * params.lot_size_m
        w = round(float(rng.uniform(params.min_footprint_m, max_fp)), 2)
        d = round(float(rng.uniform(params.min_footprint_m, max_fp)), 2)
        jx = round(float(rng.uniform(-1, 1)) * (usable - w) / 2.0, 2)
        jy = round(float(rng.uniform(-1, 1)) * (usable - d) / 2.0, 2)
        x0, y0 = cx + jx - w / 2.0, cy + jy - d / 2.0
        rects.append((x0, y0, x0 + w, y0 + d, _height(params, rng)))
    return rects


def _asymmetric_city(params: SyntheticParams, rng: np.random.Generator):
    """Dense right half, sparse left half: left area is capped at left_fraction of the right area."""
    mid = params.width_m / 2.0
    margin = params.street_m / 2.0
    right_region = (mid + margin, margin, params.width_m - margin, params.depth_m - margin)
    left_region = (margin, margin, mid - margin, params.depth_m - margin)

    right_half_area = (params.width_m - mid) * params.depth_m
    right_target = params.density * _MAX_HALF_COVERAGE * right_half_area

    placed: list = []
    rects: list = []
    right_area = _fill_region(
        right_region, right_target, params, rng, placed, rects, strict=True
    )
    _fill_region(
        left_region, params.left_fraction * right_area, params, rng, placed, rects, strict=False
    )
    return rects


def _fill_region(region, target_area, params, rng, placed, rects, strict: bool) -> float:
    """Rejection-sample non-overlapping rectangles into region until target_area is reached."""
    x_lo, y_lo, x_hi, y_hi = region
    area = 0.0
    failures = 0
    while area < target_area:
        if failures >= params.max_retries:
            if strict:
                raise SceneGenerationError(
                    f"could not reach building area {target_area:.1f} m2 without overlap "
                    f"after {params.max_retries} retries (placed {area:.1f} m2)"
                )
            break
        w = round(float(rng.uniform(params.min_footprint_m, params.max_footprint_m)), 2)
        d = round(float(rng.uniform(params.min_footprint_m, params.max_footprint_m)), 2)
        if x_hi - x_lo < w or y_hi - y_lo < d:
            failures += 1
            continue
        x0 = round(float(rng.uniform(x_lo, x_hi - w)), 2)
        y0 = round(float(rng.uniform(y_lo, y_hi - d)), 2)
        candidate = box(x0, y0, x0 + w, y0 + d)
        too_big = not strict and area + w * d > target_area
        if too_big or any(candidate.distance(other) < params.street_m for other in placed):
            failures += 1
            continue
        placed.append(candidate)
        rects.append((x0, y0, x0 + w, y0 + d, _height(params, rng)))
        area += w * d
        failures = 0
    return area
