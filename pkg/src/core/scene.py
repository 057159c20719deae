"""
Scene geometry and its grid discretization.

The world is 2.5D: building footprints in meters plus a scalar height, on a
flat ground plane. `RasterGrid` owns the cell <-> coordinate mapping that
every other module uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import Polygon

from src.config import settings
from src.core.errors import GridTooLargeError, SceneValidationError
from src.logging import get_logger

logger = get_logger(__name__)

Point = Tuple[float, float]
Bounds = Tuple[float, float, float, float]


def signed_area(footprint: Sequence[Point]) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    xs = np.asarray([p[0] for p in footprint], dtype=float)
    ys = np.asarray([p[1] for p in footprint], dtype=float)
    return 0.5 * float(np.dot(xs, np.roll(ys, -1)) - np.dot(np.roll(xs, -1), ys))


def is_ccw(footprint: Sequence[Point]) -> bool:
    return signed_area(footprint) > 0.0


@dataclass(frozen=True)
class Building:
    footprint: Tuple[Point, ...]
    height_m: float

    def __post_init__(self):
        ring = tuple((float(x), float(y)) for x, y in self.footprint)
        # Drop an explicit closing vertex; rings are implicitly closed.
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise SceneValidationError("footprint needs at least 3 vertices")
        if not self.height_m > 0:
            raise SceneValidationError(f"height_m must be > 0, got {self.height_m}")
        area = signed_area(ring)
        if area == 0.0:
            raise SceneValidationError("footprint has zero area")
        if not Polygon(ring).is_valid:
            raise SceneValidationError("footprint is self-intersecting")
        if area < 0.0:
            ring = tuple(reversed(ring))
        object.__setattr__(self, "footprint", ring)
        object.__setattr__(self, "height_m", float(self.height_m))

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.footprint)

    @property
    def area_m2(self) -> float:
        return signed_area(self.footprint)

    def edges(self) -> np.ndarray:
        """(E, 4) array of wall segments x0, y0, x1, y1."""
        pts = np.asarray(self.footprint, dtype=float)
        nxt = np.roll(pts, -1, axis=0)
        return np.hstack([pts, nxt])


@dataclass(frozen=True)
class Scene:
    bounds: Bounds
    buildings: Tuple[Building, ...] = ()
    name: str = "scene"

    def __post_init__(self):
        x_min, y_min, x_max, y_max = (float(v) for v in self.bounds)
        if not (x_max > x_min and y_max > y_min):
            raise SceneValidationError(f"bounds must have positive width and height, got {self.bounds}")
        object.__setattr__(self, "bounds", (x_min, y_min, x_max, y_max))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        for idx, building in enumerate(self.buildings):
            for x, y in building.footprint:
                if not (x_min <= x <= x_max and y_min <= y <= y_max):
                    raise SceneValidationError(
                        f"vertex ({x}, {y}) lies outside bounds {self.bounds}", building_index=idx
                    )

    @property
    def width_m(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height_m(self) -> float:
        return self.bounds[3] - self.bounds[1]

    def contains(self, x: float, y: float) -> bool:
        x_min, y_min, x_max, y_max = self.bounds
        return x_min <= x <= x_max and y_min <= y <= y_max

    def building_area_m2(self) -> float:
        return sum(b.area_m2 for b in self.buildings)


def build_scene(bounds: Iterable[float], raw_buildings: Iterable[Tuple[Sequence[Point], float]], name: str) -> Scene:
    """Construct a Scene, tagging geometry errors with the offending building index."""
    buildings = []
    for idx, (footprint, height) in enumerate(raw_buildings):
        try:
            buildings.append(Building(footprint=tuple(map(tuple, footprint)), height_m=height))
        except SceneValidationError as exc:
            raise SceneValidationError(str(exc), building_index=idx) from exc
    return Scene(bounds=tuple(bounds), buildings=tuple(buildings), name=name)


@dataclass(frozen=True)
class GridSpec:
    cell_size_m: float = settings.grid.cell_size_m
    receiver_height_m: float = settings.grid.receiver_height_m

    def __post_init__(self):
        if not self.cell_size_m > 0:
            raise ValueError(f"cell_size_m must be > 0, got {self.cell_size_m}")
        if self.receiver_height_m < 0:
            raise ValueError(f"receiver_height_m must be >= 0, got {self.receiver_height_m}")


@dataclass(frozen=True)
class RasterGrid:
    """A GridSpec laid over concrete scene bounds. Cells are indexed [i, j] with i along x."""

    bounds: Bounds
    spec: GridSpec

    @property
    def nx(self) -> int:
        return _cells_along(self.bounds[2] - self.bounds[0], self.spec.cell_size_m)

    @property
    def ny(self) -> int:
        return _cells_along(self.bounds[3] - self.bounds[1], self.spec.cell_size_m)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nx, self.ny

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny

    def center(self, i, j):
        cs = self.spec.cell_size_m
        return self.bounds[0] + (np.asarray(i) + 0.5) * cs, self.bounds[1] + (np.asarray(j) + 0.5) * cs

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """(nx, ny) arrays of cell-center x and y."""
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return self.center(ii, jj)

    def cell_of(self, x, y):
        """Cell indices containing (x, y); points on the far edge map to the last cell."""
        cs = self.spec.cell_size_m
        i = np.clip(np.floor((np.asarray(x) - self.bounds[0]) / cs).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor((np.asarray(y) - self.bounds[1]) / cs).astype(int), 0, self.ny - 1)
        return i, j


def _cells_along(extent: float, cell_size: float) -> int:
    return max(1, math.ceil(round(extent / cell_size, 9)))


@dataclass(frozen=True, eq=False)
class CellMask:
    grid: RasterGrid
    building: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.building.setflags(write=False)

    @property
    def width(self) -> int:
        return self.grid.nx

    @property
    def height(self) -> int:
        return self.grid.ny

    @property
    def outdoor(self) -> np.ndarray:
        return ~self.building

    @property
    def outdoor_count(self) -> int:
        return int(self.outdoor.sum())

    @property
    def building_count(self) -> int:
        return int(self.building.sum())

    def is_outdoor(self, x: float, y: float) -> bool:
        i, j = self.grid.cell_of(x, y)
        return not bool(self.building[i, j])

    def same_grid(self, grid: RasterGrid) -> bool:
        return self.grid == grid


def rasterize(scene: Scene, grid: GridSpec, max_cells: int = settings.grid.max_cells) -> CellMask:
    """Classify every cell as Building (center inside or on a footprint) or Outdoor."""
    raster = RasterGrid(bounds=scene.bounds, spec=grid)
    if raster.cell_count > max_cells:
        raise GridTooLargeError(
            f"grid {raster.nx}x{raster.ny} = {raster.cell_count} cells exceeds limit {max_cells}"
        )
    xs, ys = raster.centers()
    building = np.zeros(raster.shape, dtype=bool)
    for b in scene.buildings:
        poly = b.polygon
        shapely.prepare(poly)
        building |= shapely.intersects_xy(poly, xs, ys)
    logger.debug(
        "Rasterized %s: %dx%d cells, %d building",
        scene.name, raster.nx, raster.ny, int(building.sum()),
    )
    return CellMask(grid=raster, building=building)
