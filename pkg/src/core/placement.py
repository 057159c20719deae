"""
Small-cell placement: minimum station count meeting a coverage-ratio target.

Candidate coverage sets are computed once and cached as packed bitsets;
greedy, hill climbing and brute force then work purely on the cache.
Uniform placement snaps a k x k partition onto the same candidate lattice.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.core.errors import (
    DegenerateSceneError,
    NoCandidatesError,
    TargetUnreachableError,
    TooManyCandidatesError,
)
from src.core.propagation import (
    CoverageMap,
    CoverageSet,
    RayTracerConfig,
    Transmitter,
    coverage_ratio,
    coverage_set,
)
from src.core.power import STATION_CLASSES, get_station_class, network_total_power_w
from src.core.scene import CellMask, GridSpec, Scene, rasterize
from src.logging import get_logger
from src.ports.output.propagation import PropagationPort

logger = get_logger(__name__)

Position = Tuple[float, float]

ALGORITHMS = ("greedy", "hill", "uniform", "brute")

_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint16)


def popcount(packed: np.ndarray) -> np.ndarray:
    """Set-bit count along the last axis of a packed uint8 array."""
    return _POPCOUNT[packed].sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True)
class StationTemplate:
    height_m: float = settings.station.height_m
    tx_power_dbm: float = settings.station.tx_power_dbm
    frequency_hz: float = settings.station.frequency_hz
    station_class: str = settings.station.station_class

    def at(self, position: Position) -> Transmitter:
        return Transmitter(
            position=position,
            height_m=self.height_m,
            tx_power_dbm=self.tx_power_dbm,
            frequency_hz=self.frequency_hz,
            station_class=self.station_class,
        )


def lattice_points(bounds, spacing_m: float) -> Tuple[List[Position], Tuple[int, int]]:
    """Points at the centers of a spacing_m lattice over the bounds, row-major (y rows, x columns)."""
    if not spacing_m > 0:
        raise ValueError("candidate spacing must be > 0")
    x_min, y_min, x_max, y_max = bounds
    kx = max(1, int(math.floor(round((x_max - x_min) / spacing_m, 9))))
    ky = max(1, int(math.floor(round((y_max - y_min) / spacing_m, 9))))
    points = [
        (x_min + (a + 0.5) * spacing_m, y_min + (b + 0.5) * spacing_m)
        for b in range(ky)
        for a in range(kx)
    ]
    return points, (kx, ky)


def outdoor_candidates(mask: CellMask, spacing_m: float) -> List[Position]:
    """Lattice points snapped to their cell center, Outdoor cells only, de-duplicated in order."""
    points, _ = lattice_points(mask.grid.bounds, spacing_m)
    seen = set()
    out: List[Position] = []
    for x, y in points:
        i, j = mask.grid.cell_of(x, y)
        i, j = int(i), int(j)
        if mask.building[i, j] or (i, j) in seen:
            continue
        seen.add((i, j))
        cx, cy = mask.grid.center(i, j)
        out.append((float(cx), float(cy)))
    return out


@dataclass(frozen=True, eq=False)
class PlacementProblem:
    scene: Scene
    grid: GridSpec
    mask: CellMask
    station_template: StationTemplate = field(default_factory=StationTemplate)
    sensitivity_dbm: float = settings.placement.coverage_threshold_dbm
    target_ratio: float = 1.0
    candidate_spacing_m: float = settings.placement.candidate_spacing_m
    overshoot_factor: float = settings.placement.overshoot_factor
    tracer_cfg: RayTracerConfig = field(default_factory=RayTracerConfig)

    def __post_init__(self):
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError(f"target_ratio must be in (0, 1], got {self.target_ratio}")
        if not self.candidate_spacing_m > 0:
            raise ValueError("candidate_spacing_m must be > 0")
        if self.overshoot_factor < 1.0:
            raise ValueError("overshoot_factor must be >= 1")
        if self.mask.outdoor_count == 0:
            raise DegenerateSceneError("scene has no outdoor cells")

    @classmethod
    def create(cls, scene: Scene, grid: GridSpec, **kwargs) -> "PlacementProblem":
        return cls(scene=scene, grid=grid, mask=rasterize(scene, grid), **kwargs)

    @property
    def candidates(self) -> List[Position]:
        return outdoor_candidates(self.mask, self.candidate_spacing_m)

    def with_target(self, target_ratio: float) -> "PlacementProblem":
        return replace(self, target_ratio=target_ratio)

    def target_from_reference(self, e_m: float) -> float:
        """min(1, overshoot * e_m), the halt target the densified network must meet."""
        return min(1.0, self.overshoot_factor * e_m)


@dataclass(frozen=True)
class PlacementSolution:
    algorithm: str
    sites: Tuple[Position, ...]
    site_indices: Tuple[int, ...]
    ratio_curve: Tuple[float, ...]
    evaluations: int
    gain_evaluations: int = 0
    # Uniform only: (k, stations, ratio) for every k tried.
    trajectory: Tuple[Tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if len(self.sites) != len(self.ratio_curve):
            raise ValueError("sites and ratio_curve must have equal length")
        if any(b < a for a, b in zip(self.ratio_curve, self.ratio_curve[1:])):
            raise ValueError("ratio_curve must be non-decreasing")

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def final_ratio(self) -> float:
        return self.ratio_curve[-1] if self.ratio_curve else 0.0


class CandidateCache:
    """Per-candidate coverage sets stored as packed bitsets over the flattened grid."""

    def __init__(self, positions: Sequence[Position], mask: CellMask, packed: Optional[np.ndarray] = None):
        self.positions: Tuple[Position, ...] = tuple(positions)
        self.mask = mask
        self.cell_count = mask.grid.cell_count
        self.words = (self.cell_count + 7) // 8
        self.outdoor_count = mask.outdoor_count
        self.evaluations = 0
        if packed is None:
            packed = np.zeros((len(self.positions), self.words), dtype=np.uint8)
            self._ready = np.zeros(len(self.positions), dtype=bool)
        else:
            self._ready = np.ones(len(self.positions), dtype=bool)
        self.packed = packed
        self._fill = None

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_sets(cls, positions: Sequence[Position], sets: Sequence[np.ndarray], mask: CellMask) -> "CandidateCache":
        """Build from boolean (nx, ny) coverage arrays; non-Outdoor cells are dropped."""
        if len(positions) != len(sets):
            raise ValueError("positions and sets must have equal length")
        packed = np.stack([cls._pack(np.asarray(s, dtype=bool) & mask.outdoor) for s in sets]) if sets else \
            np.zeros((0, (mask.grid.cell_count + 7) // 8), dtype=np.uint8)
        return cls(positions, mask, packed)

    @classmethod
    def from_maps(
        cls,
        positions: Sequence[Position],
        maps: Sequence[CoverageMap],
        mask: CellMask,
        threshold_dbm: float,
        tx_power_dbm: Optional[float] = None,
    ) -> "CandidateCache":
        """Threshold precomputed maps; tx_power_dbm re-rates every map to another power level."""
        sets = []
        for cmap in maps:
            if tx_power_dbm is None:
                sets.append(coverage_set(cmap, mask, threshold_dbm).covered)
            else:
                sets.append(cmap.reached & (tx_power_dbm - np.nan_to_num(cmap.path_loss_db, nan=np.inf) >= threshold_dbm))
        cache = cls.from_sets(positions, sets, mask)
        cache.evaluations = len(maps)
        return cache

    @staticmethod
    def _pack(covered: np.ndarray) -> np.ndarray:
        return np.packbits(covered.ravel())

    def attach(self, fill) -> "CandidateCache":
        """Lazy mode: fill(index) -> CoverageSet is called the first time a candidate is needed."""
        self._fill = fill
        return self

    def ensure(self, indices: Sequence[int]) -> None:
        for idx in indices:
            if not self._ready[idx]:
                if self._fill is None:
                    raise RuntimeError(f"candidate {idx} was never computed")
                self.packed[idx] = self._pack(self._fill(idx).covered & self.mask.outdoor)
                self._ready[idx] = True
                self.evaluations += 1

    def covered(self, idx: int) -> np.ndarray:
        self.ensure([idx])
        bits = np.unpackbits(self.packed[idx], count=self.cell_count).astype(bool)
        return bits.reshape(self.mask.grid.shape)

    def coverage_set(self, idx: int, threshold_dbm: float) -> CoverageSet:
        return CoverageSet(grid=self.mask.grid, covered=self.covered(idx), threshold_dbm=threshold_dbm)

    def empty_union(self) -> np.ndarray:
        return np.zeros(self.words, dtype=np.uint8)

    def marginal_gains(self, union: np.ndarray) -> np.ndarray:
        """|set(c) minus union| for every candidate."""
        self.ensure(range(len(self)))
        return popcount(np.bitwise_and(self.packed, np.bitwise_not(union)))

    def union_of(self, indices: Sequence[int]) -> np.ndarray:
        self.ensure(indices)
        union = self.empty_union()
        for idx in indices:
            np.bitwise_or(union, self.packed[idx], out=union)
        return union

    def ratio(self, union: np.ndarray) -> float:
        return float(popcount(union)) / self.outdoor_count


def macro_reference(
    problem: PlacementProblem,
    macro: Transmitter,
    engine: Optional[PropagationPort] = None,
    sensitivity_dbm: Optional[float] = None,
    cmap: Optional[CoverageMap] = None,
) -> Tuple[float, CoverageSet]:
    """Coverage ratio e_m of the reference macro station and its coverage set."""
    if not problem.scene.contains(*macro.position):
        raise ValueError(f"macro position {macro.position} lies outside scene bounds")
    if cmap is None:
        if engine is None:
            raise ValueError("macro_reference needs an engine or a precomputed map")
        cmap = engine.compute_coverage_map(problem.scene, problem.grid, macro, problem.tracer_cfg, problem.mask)
    threshold = problem.sensitivity_dbm if sensitivity_dbm is None else sensitivity_dbm
    reference = coverage_set(cmap, problem.mask, threshold)
    e_m = coverage_ratio([reference], problem.mask)
    logger.info("Macro reference at %s (h=%.0f m, %.0f dBm): e_m=%.4f", macro.position, macro.height_m, macro.tx_power_dbm, e_m)
    return e_m, reference


def candidate_maps(problem: PlacementProblem, engine: PropagationPort, threads: int = 1) -> Tuple[List[Position], List[CoverageMap]]:
    """One coverage map per Outdoor candidate, in candidate order."""
    positions = problem.candidates
    if not positions:
        raise NoCandidatesError(
            f"no Outdoor candidate points at {problem.candidate_spacing_m} m spacing"
        )
    template = problem.station_template

    def compute(position: Position) -> CoverageMap:
        return engine.compute_coverage_map(
            problem.scene, problem.grid, template.at(position), problem.tracer_cfg, problem.mask
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            maps = list(pool.map(compute, positions))
    else:
        maps = [compute(p) for p in positions]
    return positions, maps


def build_candidates(problem: PlacementProblem, engine: PropagationPort, threads: int = 1) -> CandidateCache:
    """Coverage set for the station template at every candidate."""
    positions, maps = candidate_maps(problem, engine, threads)
    cache = CandidateCache.from_maps(positions, maps, problem.mask, problem.sensitivity_dbm)
    logger.info("Built %d candidate coverage sets (spacing %.1f m)", len(cache), problem.candidate_spacing_m)
    return cache


def lazy_candidates(problem: PlacementProblem, engine: PropagationPort) -> CandidateCache:
    """Cache that computes each candidate's map only when first needed."""
    positions = problem.candidates
    if not positions:
        raise NoCandidatesError(f"no Outdoor candidate points at {problem.candidate_spacing_m} m spacing")
    template = problem.station_template

    def fill(idx: int) -> CoverageSet:
        cmap = engine.compute_coverage_map(
            problem.scene, problem.grid, template.at(positions[idx]), problem.tracer_cfg, problem.mask
        )
        return coverage_set(cmap, problem.mask, problem.sensitivity_dbm)

    return CandidateCache(positions, problem.mask).attach(fill)


def _target(problem: PlacementProblem) -> float:
    return min(problem.target_ratio, 1.0)


def _solution(algorithm, cache, chosen, curve, gain_evals, trajectory=()) -> PlacementSolution:
    return PlacementSolution(
        algorithm=algorithm,
        sites=tuple(cache.positions[i] for i in chosen),
        site_indices=tuple(int(i) for i in chosen),
        ratio_curve=tuple(curve),
        evaluations=cache.evaluations,
        gain_evaluations=gain_evals,
        trajectory=tuple(trajectory),
    )


def _unreachable(solution: PlacementSolution, target: float) -> TargetUnreachableError:
    return TargetUnreachableError(
        f"{solution.algorithm} saturated at ratio {solution.final_ratio:.4f} "
        f"with {solution.n} stations, below target {target:.4f}",
        solution=solution,
    )


def greedy_placement(problem: PlacementProblem, cache: CandidateCache) -> PlacementSolution:
    """Add the candidate with the largest marginal gain until the target is met."""
    target = _target(problem)
    union = cache.empty_union()
    chosen: List[int] = []
    curve: List[float] = []
    gain_evals = 0
    while cache.ratio(union) < target:
        gains = cache.marginal_gains(union)
        gain_evals += len(cache)
        best = int(np.argmax(gains))  # first maximum = lowest index on ties
        if gains[best] == 0:
            raise _unreachable(_solution("greedy", cache, chosen, curve, gain_evals), target)
        np.bitwise_or(union, cache.packed[best], out=union)
        chosen.append(best)
        curve.append(cache.ratio(union))
        logger.debug("greedy step %d: candidate %d gain %d ratio %.4f", len(chosen), best, gains[best], curve[-1])
    logger.info("Greedy placement: %d stations, ratio %.4f (target %.4f)", len(chosen), cache.ratio(union), target)
    return _solution("greedy", cache, chosen, curve, gain_evals)


def hill_climb_placement(
    problem: PlacementProblem,
    cache: CandidateCache,
    iters_per_station: int = settings.placement.hill_iters_per_station,
    seed: int = 0,
) -> PlacementSolution:
    """
    Add stations one at a time; the newest starts at a random candidate and is
    re-drawn iters_per_station times without replacement, keeping the best.
    When every draw in that budget adds nothing, drawing continues until one
    does, so a station is never placed with zero gain while gains remain.
    Earlier stations stay fixed.
    """
    if iters_per_station < 1:
        raise ValueError("iters_per_station must be >= 1")
    target = _target(problem)
    rng = np.random.default_rng(seed)
    union = cache.empty_union()
    chosen: List[int] = []
    curve: List[float] = []
    gain_evals = 0
    budget = min(iters_per_station + 1, len(cache))

    while cache.ratio(union) < target:
        gains = cache.marginal_gains(union)
        if gains.max() == 0:
            raise _unreachable(_solution("hill", cache, chosen, curve, gain_evals), target)
        order = rng.permutation(len(cache))
        best, best_gain = -1, -1
        for drawn, cand in enumerate(order):
            # Keep drawing past the budget only while nothing sampled adds coverage.
            if drawn >= budget and best_gain > 0:
                break
            gain = int(gains[cand])
            gain_evals += 1
            if gain > best_gain or (gain == best_gain and cand < best):
                best, best_gain = int(cand), gain
        np.bitwise_or(union, cache.packed[best], out=union)
        chosen.append(best)
        curve.append(cache.ratio(union))
    logger.info("Hill climbing placement: %d stations, ratio %.4f", len(chosen), cache.ratio(union))
    return _solution("hill", cache, chosen, curve, gain_evals)


def _partition_centers(bounds, k: int) -> List[Position]:
    x_min, y_min, x_max, y_max = bounds
    w, h = (x_max - x_min) / k, (y_max - y_min) / k
    return [(x_min + (a + 0.5) * w, y_min + (b + 0.5) * h) for b in range(k) for a in range(k)]


def _snap(points: Sequence[Position], positions: Sequence[Position]) -> List[int]:
    """Nearest unused candidate for each point, lowest index on ties."""
    cand = np.asarray(positions, dtype=float)
    used = np.zeros(len(positions), dtype=bool)
    picks = []
    for x, y in points:
        dist = np.hypot(cand[:, 0] - x, cand[:, 1] - y)
        dist[used] = np.inf
        idx = int(np.argmin(dist))
        used[idx] = True
        picks.append(idx)
    return picks


def uniform_placement(
    problem: PlacementProblem,
    engine: Optional[PropagationPort] = None,
    cache: Optional[CandidateCache] = None,
    k_max: int = settings.placement.uniform_k_max,
) -> PlacementSolution:
    """k x k partition centers for k = 1, 2, ... until the target is met."""
    if cache is None:
        if engine is None:
            raise ValueError("uniform_placement needs an engine or a candidate cache")
        cache = lazy_candidates(problem, engine)
    if len(cache) == 0:
        raise NoCandidatesError("no Outdoor candidate points")
    target = _target(problem)
    trajectory: List[Tuple[int, int, float]] = []
    solution = None
    for k in range(1, k_max + 1):
        if k * k > len(cache):
            break
        chosen = _snap(_partition_centers(problem.scene.bounds, k), cache.positions)
        union = cache.empty_union()
        curve = []
        for idx in chosen:
            cache.ensure([idx])
            np.bitwise_or(union, cache.packed[idx], out=union)
            curve.append(cache.ratio(union))
        trajectory.append((k, len(chosen), curve[-1]))
        solution = _solution("uniform", cache, chosen, curve, 0, trajectory)
        logger.debug("uniform k=%d: %d stations ratio %.4f", k, len(chosen), curve[-1])
        if curve[-1] >= target:
            logger.info("Uniform placement: k=%d, %d stations, ratio %.4f", k, len(chosen), curve[-1])
            return solution
    if solution is None:
        solution = _solution("uniform", cache, [], [], 0, trajectory)
    raise _unreachable(solution, target)


def brute_force_placement(
    problem: PlacementProblem,
    cache: CandidateCache,
    max_candidates: int = settings.placement.brute_max_candidates,
) -> PlacementSolution:
    """Exhaustive search by increasing cardinality; lexicographically least minimum subset."""
    if max_candidates > 20:
        raise ValueError("max_candidates is capped at 20")
    if len(cache) > max_candidates:
        raise TooManyCandidatesError(
            f"{len(cache)} candidates exceed the brute-force limit of {max_candidates}; "
            "shrink the scene or widen the candidate spacing"
        )
    target = _target(problem)
    all_idx = list(range(len(cache)))
    if cache.ratio(cache.union_of(all_idx)) < target:
        raise _unreachable(_solution("brute", cache, [], [], 0), target)

    gain_evals = 0
    for size in range(1, len(cache) + 1):
        for subset in itertools.combinations(all_idx, size):
            gain_evals += 1
            union = cache.union_of(subset)
            if cache.ratio(union) >= target:
                curve = []
                running = cache.empty_union()
                for idx in subset:
                    np.bitwise_or(running, cache.packed[idx], out=running)
                    curve.append(cache.ratio(running))
                logger.info("Brute-force placement: %d stations after %d subsets", size, gain_evals)
                return _solution("brute", cache, list(subset), curve, gain_evals)
    raise _unreachable(_solution("brute", cache, [], [], gain_evals), target)  # pragma: no cover


def run_algorithm(
    algorithm: str,
    problem: PlacementProblem,
    cache: CandidateCache,
    seed: int = 0,
    iters_per_station: int = settings.placement.hill_iters_per_station,
    k_max: int = settings.placement.uniform_k_max,
    brute_max_candidates: int = settings.placement.brute_max_candidates,
) -> PlacementSolution:
    if algorithm == "greedy":
        return greedy_placement(problem, cache)
    if algorithm == "hill":
        return hill_climb_placement(problem, cache, iters_per_station, seed)
    if algorithm == "uniform":
        return uniform_placement(problem, cache=cache, k_max=k_max)
    if algorithm == "brute":
        return brute_force_placement(problem, cache, brute_max_candidates)
    raise ValueError(f"Unknown algorithm {algorithm!r} (expected one of {ALGORITHMS})")


def solution_sets(solution: PlacementSolution, cache: CandidateCache, threshold_dbm: float) -> List[CoverageSet]:
    return [cache.coverage_set(idx, threshold_dbm) for idx in solution.site_indices]


def solution_record(solution: PlacementSolution) -> Dict:
    return {
        "algorithm": solution.algorithm,
        "n": solution.n,
        "sites": [list(p) for p in solution.sites],
        "site_indices": list(solution.site_indices),
        "ratio_curve": list(solution.ratio_curve),
        "final_ratio": solution.final_ratio,
        "evaluations": solution.evaluations,
        "gain_evaluations": solution.gain_evaluations,
        "trajectory": [list(t) for t in solution.trajectory],
    }


@dataclass(frozen=True)
class ClassSweepRow:
    station_class: str
    tx_power_dbm: float
    stations: int
    final_ratio: float
    reached_target: bool
    total_power_w: float
    ratio_vs_single_macro: float


def class_sweep(
    problem: PlacementProblem,
    engine: PropagationPort,
    classes: Sequence[str] = tuple(STATION_CLASSES),
    threads: int = 1,
) -> List[ClassSweepRow]:
    """
    Greedy station count per station class at the template's mounting height.

    Path loss does not depend on transmit power, so candidate maps are traced
    once and re-thresholded at each class power.
    """
    positions, maps = candidate_maps(problem, engine, threads)
    macro_total = network_total_power_w(get_station_class("macro"), 1)
    rows: List[ClassSweepRow] = []
    for name in classes:
        station_class = get_station_class(name)
        cache = CandidateCache.from_maps(
            positions, maps, problem.mask, problem.sensitivity_dbm, station_class.tx_power_dbm
        )
        try:
            solution = greedy_placement(problem, cache)
            reached = True
        except TargetUnreachableError as exc:
            solution, reached = exc.solution, False
        total = network_total_power_w(station_class, solution.n)
        rows.append(
            ClassSweepRow(
                station_class=name,
                tx_power_dbm=station_class.tx_power_dbm,
                stations=solution.n,
                final_ratio=solution.final_ratio,
                reached_target=reached,
                total_power_w=total,
                ratio_vs_single_macro=total / macro_total,
            )
        )
        logger.info("Class sweep %s: %d stations, %.1f W", name, solution.n, total)
    return rows
