"""
Ray Launching Adapter - 2.5D coverage engine behind PropagationPort.

Two components feed each cell's best (minimum) path loss:

1. Direct path, evaluated analytically per cell. A building blocks the
   sight line when its footprint crosses the 2D segment and its height
   exceeds the line's interpolated height at the crossing.
2. Launched rays. Rays fly horizontally at transmitter height, reflect
   specularly off walls at least as tall as the transmitter and deposit a
   candidate loss at the entry point of every cell they cross.

Per-cell minima are combined with an order-independent reduction, so the
result does not depend on how batches are scheduled across threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from shapely.geometry import Point

from src.config import settings
from src.core.propagation import (
    CoverageMap,
    RayTracerConfig,
    Transmitter,
    free_space_path_loss_db,
    sector_contains,
)
from src.core.scene import CellMask, GridSpec, RasterGrid, Scene, rasterize
from src.logging import get_logger
from src.ports.output.propagation import PropagationPort

logger = get_logger(__name__)

_EPS = 1e-9
# A reflected ray must travel this far before it can hit another wall.
_MIN_HIT_DISTANCE = 1e-7


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def van_der_corput(n: int) -> np.ndarray:
    """First n points of the base-2 radical inverse sequence."""
    idx = np.arange(n, dtype=np.uint64)
    out = np.zeros(n, dtype=float)
    nbits = max(1, int(n - 1).bit_length())
    for b in range(nbits):
        out += ((idx >> np.uint64(b)) & np.uint64(1)).astype(float) * 2.0 ** -(b + 1)
    return out


def launch_azimuths(cfg: RayTracerConfig) -> np.ndarray:
    """
    Ray azimuths in radians.

    Stratified launch uses a seed-rotated van der Corput lattice: the first
    2^k rays put exactly one ray in each of 2^k equal sectors, and the first
    n rays of a launch are always the rays of any smaller launch.
    """
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    if cfg.stratified:
        rotation = rng.random()
        frac = np.mod(van_der_corput(cfg.num_samples) + rotation, 1.0)
    else:
        frac = rng.random(cfg.num_samples)
    return np.radians(cfg.sector_start_deg + frac * cfg.sector_width_deg)


class RayLaunchingEngine(PropagationPort):
    """Deterministic direct-path + ray-launching coverage engine."""

    def __init__(self, threads: int = 1, batch_size: int = settings.tracer.batch_size):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self.batch_size = batch_size

    def compute_coverage_map(
        self,
        scene: Scene,
        grid: GridSpec,
        tx: Transmitter,
        cfg: RayTracerConfig,
        mask: Optional[CellMask] = None,
    ) -> CoverageMap:
        if not scene.contains(*tx.position):
            raise ValueError(f"transmitter {tx.position} lies outside scene bounds {scene.bounds}")
        mask = mask if mask is not None else rasterize(scene, grid)
        raster = mask.grid

        xs, ys = raster.centers()
        dh = tx.height_m - grid.receiver_height_m
        dx, dy = xs - tx.position[0], ys - tx.position[1]
        floor_dist = np.maximum(np.sqrt(dx**2 + dy**2 + dh**2), cfg.min_distance_m)
        in_sector = sector_contains(dx, dy, cfg.sector_start_deg, cfg.sector_width_deg)

        best = np.full(raster.shape, np.inf)
        if cfg.direct_path:
            visible = self._direct_visibility(scene, raster, tx) & mask.outdoor & in_sector
            visible &= np.sqrt(dx**2 + dy**2) <= cfg.max_range_m
            best[visible] = free_space_path_loss_db(floor_dist[visible], tx.frequency_hz)

        best = np.minimum(best, self._launch_rays(scene, raster, tx, cfg, floor_dist))
        best[mask.building] = np.inf
        path_loss = np.where(np.isfinite(best), best, np.nan)

        logger.debug(
            "Coverage map tx=%s h=%.1f: %d/%d cells reached",
            tx.position, tx.height_m, int(np.isfinite(best).sum()), raster.cell_count,
        )
        return CoverageMap(grid=raster, tx=tx, path_loss_db=path_loss)

    # ------------------------------------------------------------------ direct

    def _direct_visibility(self, scene: Scene, raster: RasterGrid, tx: Transmitter) -> np.ndarray:
        """True where no building blocks the 3D sight line to the cell center."""
        xs, ys = raster.centers()
        tx_x, tx_y = tx.position
        rx_h = raster.spec.receiver_height_m
        rx = (xs - tx_x).ravel()[:, None]
        ry = (ys - tx_y).ravel()[:, None]
        blocked = np.zeros(rx.shape[0], dtype=bool)
        descending = tx.height_m >= rx_h

        for building in scene.buildings:
            if building.height_m <= min(tx.height_m, rx_h):
                continue
            edges = building.edges()
            ax, ay = edges[:, 0] - tx_x, edges[:, 1] - tx_y
            sx, sy = edges[:, 2] - edges[:, 0], edges[:, 3] - edges[:, 1]
            denom = _cross(rx, ry, sx, sy)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = _cross(ax, ay, sx, sy) / denom
                u = _cross(ax, ay, rx, ry) / denom
            hit = (np.abs(denom) > _EPS) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)

            # The sight line is lowest at its last crossing when descending, first when ascending.
            if descending:
                t_crit = np.where(hit, t, -np.inf).max(axis=1)
            else:
                t_crit = np.where(hit, t, np.inf).min(axis=1)
                if building.polygon.covers(Point(tx_x, tx_y)):
                    t_crit = np.zeros_like(t_crit)
            crossed = np.isfinite(t_crit)
            z = tx.height_m + (rx_h - tx.height_m) * np.where(crossed, t_crit, 0.0)
            blocked |= crossed & (building.height_m > z)

        return ~blocked.reshape(raster.shape)

    # -------------------------------------------------------------------- rays

    def _launch_rays(
        self,
        scene: Scene,
        raster: RasterGrid,
        tx: Transmitter,
        cfg: RayTracerConfig,
        floor_dist: np.ndarray,
    ) -> np.ndarray:
        walls = [b.edges() for b in scene.buildings if b.height_m >= tx.height_m]
        walls_arr = np.vstack(walls) if walls else np.zeros((0, 4))
        azimuths = launch_azimuths(cfg)
        batches = [
            azimuths[start:start + self.batch_size]
            for start in range(0, azimuths.size, self.batch_size)
        ]

        def run(batch: np.ndarray) -> np.ndarray:
            return self._trace_batch(batch, walls_arr, raster, tx, cfg, floor_dist.ravel())

        best = np.full(raster.cell_count, np.inf)
        if self.threads == 1 or len(batches) == 1:
            for batch in batches:
                np.minimum(best, run(batch), out=best)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                for partial in pool.map(run, batches):
                    np.minimum(best, partial, out=best)
        return best.reshape(raster.shape)

    def _trace_batch(
        self,
        azimuths: np.ndarray,
        walls: np.ndarray,
        raster: RasterGrid,
        tx: Transmitter,
        cfg: RayTracerConfig,
        floor_flat: np.ndarray,
    ) -> np.ndarray:
        best = np.full(raster.cell_count, np.inf)
        n = azimuths.size
        px = np.full(n, tx.position[0])
        py = np.full(n, tx.position[1])
        dx, dy = np.cos(azimuths), np.sin(azimuths)
        traveled = np.zeros(n)
        alive = np.ones(n, dtype=bool)

        for bounces in range(cfg.max_depth + 1):
            if not alive.any():
                break
            idx = np.flatnonzero(alive)
            t_hit, normals = _nearest_wall(px[idx], py[idx], dx[idx], dy[idx], walls)
            t_exit = _box_exit(px[idx], py[idx], dx[idx], dy[idx], raster.bounds)
            remaining = cfg.max_range_m - traveled[idx]
            seg_len = np.minimum(np.minimum(t_hit, t_exit), remaining)

            _deposit(
                best, raster, tx, cfg, floor_flat,
                px[idx], py[idx], dx[idx], dy[idx], seg_len, traveled[idx], bounces,
            )

            reflects = (t_hit <= t_exit) & (t_hit < remaining) & (bounces < cfg.max_depth)
            alive[:] = False
            if not reflects.any():
                break
            r = idx[reflects]
            th = t_hit[reflects]
            nx, ny = normals[0][reflects], normals[1][reflects]
            px[r] += th * dx[r]
            py[r] += th * dy[r]
            traveled[r] += th
            dot = dx[r] * nx + dy[r] * ny
            dx[r] -= 2.0 * dot * nx
            dy[r] -= 2.0 * dot * ny
            alive[r] = True
        return best


def _nearest_wall(px, py, dx, dy, walls) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Distance to the first wall along each ray (inf when none) and that wall's unit normal."""
    n = px.size
    if walls.shape[0] == 0:
        return np.full(n, np.inf), (np.zeros(n), np.zeros(n))
    ax = walls[None, :, 0] - px[:, None]
    ay = walls[None, :, 1] - py[:, None]
    sx = (walls[:, 2] - walls[:, 0])[None, :]
    sy = (walls[:, 3] - walls[:, 1])[None, :]
    rdx, rdy = dx[:, None], dy[:, None]
    denom = _cross(rdx, rdy, sx, sy)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(ax, ay, sx, sy) / denom
        u = _cross(ax, ay, rdx, rdy) / denom
    valid = (np.abs(denom) > _EPS) & (t > _MIN_HIT_DISTANCE) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    wall_idx = np.argmin(t, axis=1)
    t_hit = t[np.arange(n), wall_idx]
    wx = walls[wall_idx, 2] - walls[wall_idx, 0]
    wy = walls[wall_idx, 3] - walls[wall_idx, 1]
    norm = np.hypot(wx, wy)
    return t_hit, (-wy / norm, wx / norm)


def _box_exit(px, py, dx, dy, bounds) -> np.ndarray:
    """Distance from inside the bounds to the boundary along each ray."""
    x_min, y_min, x_max, y_max = bounds
    with np.errstate(divide="ignore", invalid="ignore"):
        tx_ = np.where(dx > 0, (x_max - px) / dx, np.where(dx < 0, (x_min - px) / dx, np.inf))
        ty_ = np.where(dy > 0, (y_max - py) / dy, np.where(dy < 0, (y_min - py) / dy, np.inf))
    return np.maximum(np.minimum(tx_, ty_), 0.0)


def _line_crossings(start, delta, length, origin, cell, n_lines) -> Tuple[np.ndarray, np.ndarray]:
    """(segment index, distance) of every interior grid-line crossing strictly inside each segment."""
    end = start + delta * length
    lo = np.ceil((np.minimum(start, end) - origin) / cell).astype(np.int64)
    hi = np.floor((np.maximum(start, end) - origin) / cell).astype(np.int64)
    lo = np.maximum(lo, 1)
    hi = np.minimum(hi, n_lines - 1)
    counts = np.maximum(hi - lo + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    seg = np.repeat(np.arange(start.size), counts)
    offsets = np.cumsum(counts) - counts
    m = lo[seg] + (np.arange(total) - offsets[seg])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (origin + m * cell - start[seg]) / delta[seg]
    keep = np.isfinite(s) & (s > 0.0) & (s < length[seg])
    return seg[keep], s[keep]


def _deposit(best, raster, tx, cfg, floor_flat, px, py, dx, dy, seg_len, traveled, bounces) -> None:
    """Grid-traversal walk: one candidate per crossed cell, evaluated at the segment's entry point."""
    live = seg_len > 0.0
    if not live.any():
        return
    px, py, dx, dy = px[live], py[live], dx[live], dy[live]
    seg_len, traveled = seg_len[live], traveled[live]
    n = px.size
    cs = raster.spec.cell_size_m
    x_min, y_min = raster.bounds[0], raster.bounds[1]

    seg_x, s_x = _line_crossings(px, dx, seg_len, x_min, cs, raster.nx)
    seg_y, s_y = _line_crossings(py, dy, seg_len, y_min, cs, raster.ny)
    seg = np.concatenate([np.arange(n), seg_x, seg_y])
    s = np.concatenate([np.zeros(n), s_x, s_y])

    order = np.lexsort((s, seg))
    seg, s = seg[order], s[order]
    same_next = np.zeros(seg.size, dtype=bool)
    same_next[:-1] = seg[1:] == seg[:-1]
    s_next = np.where(same_next, np.roll(s, -1), seg_len[seg])
    piece = s_next - s > _EPS
    seg, s, s_next = seg[piece], s[piece], s_next[piece]

    mid = 0.5 * (s + s_next)
    ci, cj = raster.cell_of(px[seg] + mid * dx[seg], py[seg] + mid * dy[seg])
    flat = ci * raster.ny + cj

    dh = tx.height_m - raster.spec.receiver_height_m
    unfolded = np.sqrt((traveled[seg] + s) ** 2 + dh**2)
    # A candidate never beats the straight line to the cell center.
    dist = np.maximum(unfolded, floor_flat[flat])
    loss = free_space_path_loss_db(dist, tx.frequency_hz) + bounces * cfg.reflection_loss_db
    np.minimum.at(best, flat, loss)


def compute_many(
    engine: PropagationPort,
    scene: Scene,
    grid: GridSpec,
    transmitters: List[Transmitter],
    cfg: RayTracerConfig,
    mask: Optional[CellMask] = None,
    threads: int = 1,
) -> List[CoverageMap]:
    """Compute one map per transmitter, fanned out over threads, returned in input order."""
    mask = mask if mask is not None else rasterize(scene, grid)
    if threads <= 1 or len(transmitters) <= 1:
        return [engine.compute_coverage_map(scene, grid, tx, cfg, mask) for tx in transmitters]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda tx: engine.compute_coverage_map(scene, grid, tx, cfg, mask), transmitters))


__all__ = ["RayLaunchingEngine", "compute_many", "launch_azimuths", "van_der_corput"]
