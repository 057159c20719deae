"""
CLI command handlers.

Each command runs in two phases. `prepare_*` validates everything that can
be checked before compute (config, scene, grid, station positions) and
writes nothing. `run_*` computes and writes artifacts through the
ArtifactWriterPort; a domain failure there leaves the artifacts written so
far plus a failed report.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.adapters.output.propagation import compute_many
from src.config.run_config import Algorithm, NetworkKind, NetworkSection, PleMode, RunConfig
from src.core.errors import DegenerateSceneError, TargetUnreachableError, TooManyCandidatesError
from src.core.placement import (
    CandidateCache,
    PlacementProblem,
    PlacementSolution,
    build_candidates,
    class_sweep,
    greedy_placement,
    lattice_points,
    lazy_candidates,
    macro_reference,
    run_algorithm,
    solution_record,
    solution_sets,
)
from src.core.ple import (
    ERICSSON_ENVIRONMENTS,
    STATUS_OK,
    fit_ple,
    ple_heatmap,
    reference_rmse,
    samples_from_coverage,
)
from src.core.power import (
    STATION_CLASSES,
    TABLE_VERSION,
    class_pa_input_power_w,
    densification_report,
    get_station_class,
    network_total_power_w,
)
from src.core.propagation import CoverageMap, RayTracerConfig, Transmitter, coverage_ratio, coverage_set, overlap_and_blind
from src.core.reports import (
    RunReport,
    cdf_frame,
    class_sweep_frame,
    class_total_frame,
    coverage_frame,
    coverage_pixels,
    heatmap_frame,
    heatmap_pixels,
    net_ratio_frame,
    overlay_pixels,
    ple_samples_frame,
    ratio_curve_frame,
    trajectory_frame,
    ue_samples_frame,
)
from src.core.scene import CellMask, Scene, rasterize
from src.core.ue import compare_networks_detailed
from src.factories import create_artifact_writer, create_propagation_engine, create_scene_store, resolve_scene
from src.logging import get_logger
from src.ports.output import ArtifactWriterPort, PropagationPort

logger = get_logger(__name__)

# Mean uplink saving reported for a macro network versus a 30-femto network
# on a dense city, kept next to the observed delta for comparison.
REFERENCE_DELTA_DB = 16.0


@dataclass
class RunContext:
    command: str
    config: RunConfig
    scene: Optional[Scene] = None
    mask: Optional[CellMask] = None
    tracer: Optional[RayTracerConfig] = None
    engine: Optional[PropagationPort] = None
    writer: Optional[ArtifactWriterPort] = None
    report: Optional[RunReport] = None
    options: Optional[Dict[str, Any]] = None

    def finish(self, status: str = "ok", error: Optional[str] = None) -> None:
        self.report.status = status
        if error is not None:
            self.report.outputs["error"] = error
        self.writer.write_report(self.report.as_dict(), "report.json")


# ============================================================================
# Prepare (validation only, nothing written)
# ============================================================================

def prepare(command: str, config: RunConfig, needs_scene: bool = True, **options: Any) -> RunContext:
    ctx = RunContext(command=command, config=config, options=options)
    if needs_scene:
        ctx.scene = resolve_scene(config, create_scene_store())
        ctx.mask = rasterize(ctx.scene, config.grid.to_spec(), max_cells=config.grid.max_cells)
        ctx.tracer = config.tracer.to_config(config.seed)
        ctx.engine = create_propagation_engine(config.threads, config.tracer.batch_size)
    return ctx


def start(ctx: RunContext) -> None:
    """Open the output directory; called only once validation passed."""
    ctx.writer = create_artifact_writer(ctx.config.output_dir)
    ctx.report = RunReport(command=ctx.command, config=ctx.config.echo())
    if ctx.scene is not None:
        ctx.report.outputs["scene"] = {
            "name": ctx.scene.name,
            "buildings": len(ctx.scene.buildings),
            "grid": list(ctx.mask.grid.shape),
            "outdoor_cells": ctx.mask.outdoor_count,
        }


def _problem(ctx: RunContext, target_ratio: float = 1.0) -> PlacementProblem:
    placement = ctx.config.placement
    return PlacementProblem(
        scene=ctx.scene,
        grid=ctx.config.grid.to_spec(),
        mask=ctx.mask,
        station_template=ctx.config.station.to_template(),
        sensitivity_dbm=placement.coverage_threshold_dbm,
        target_ratio=target_ratio,
        candidate_spacing_m=placement.candidate_spacing_m,
        overshoot_factor=placement.overshoot_factor,
        tracer_cfg=ctx.tracer,
    )


def prepare_coverage(config: RunConfig) -> RunContext:
    ctx = prepare("coverage", config)
    ctx.options["tx"] = config.station.to_transmitter(ctx.scene)
    return ctx


def prepare_optimize(config: RunConfig) -> RunContext:
    ctx = prepare("optimize", config)
    placement = config.placement
    ctx.options["macro"] = placement.macro.to_transmitter(ctx.scene)
    problem = _problem(ctx)
    if placement.algorithm == Algorithm.BRUTE:
        count = len(problem.candidates)
        if count > placement.brute_max_candidates:
            raise TooManyCandidatesError(
                f"{count} candidates exceed the brute-force limit of {placement.brute_max_candidates}; "
                "shrink the scene or raise placement.candidate_spacing_m"
            )
    ctx.options["problem"] = problem
    return ctx


def prepare_ple(config: RunConfig) -> RunContext:
    ctx = prepare("ple", config)
    if config.ple.environment not in ERICSSON_ENVIRONMENTS:
        raise ValueError(f"ple.environment: unknown environment {config.ple.environment!r}")
    ctx.options["tx"] = config.station.to_transmitter(ctx.scene)
    return ctx


def prepare_ue(config: RunConfig) -> RunContext:
    ctx = prepare("ue", config)
    for label, network in (("network_a", config.ue.network_a), ("network_b", config.ue.network_b)):
        ctx.options[label] = [s.to_transmitter(ctx.scene) for s in network.stations]
        for section in network.stations:
            if section.station_class not in config.ue.sensitivity_dbm:
                raise ValueError(f"ue.sensitivity_dbm: no entry for class {section.station_class!r}")
    if NetworkKind.GREEDY in (config.ue.network_a.kind, config.ue.network_b.kind):
        ctx.options["macro"] = config.placement.macro.to_transmitter(ctx.scene)
        ctx.options["problem"] = _problem(ctx)
    return ctx


def prepare_power(config: RunConfig) -> RunContext:
    ctx = prepare("power", config, needs_scene=False)
    for s in config.power.s_values:
        config.power.params(s)
    return ctx


# ============================================================================
# Run (compute and write)
# ============================================================================

def run_coverage(ctx: RunContext) -> None:
    tx: Transmitter = ctx.options["tx"]
    with ctx.report.phase("coverage_map"):
        cmap = ctx.engine.compute_coverage_map(ctx.scene, ctx.config.grid.to_spec(), tx, ctx.tracer, ctx.mask)
    ctx.writer.write_table(coverage_frame(cmap, ctx.mask), "coverage.csv")
    ctx.writer.write_gray_image(coverage_pixels(cmap, ctx.mask), "coverage.pgm")
    threshold = ctx.config.placement.coverage_threshold_dbm
    covered = coverage_set(cmap, ctx.mask, threshold)
    ctx.report.outputs["coverage"] = {
        "tx": {"position": list(tx.position), "height_m": tx.height_m, "tx_power_dbm": tx.tx_power_dbm},
        "reached_cells": int(cmap.reached.sum()),
        "threshold_dbm": threshold,
        "coverage_ratio": coverage_ratio([covered], ctx.mask),
    }


def _macro(ctx: RunContext):
    """Macro map, its coverage set and e_m."""
    problem: PlacementProblem = ctx.options["problem"]
    macro: Transmitter = ctx.options["macro"]
    placement = ctx.config.placement
    threshold = placement.macro_threshold_dbm
    if threshold is None:
        threshold = placement.coverage_threshold_dbm
    with ctx.report.phase("macro_reference"):
        cmap = ctx.engine.compute_coverage_map(ctx.scene, problem.grid, macro, ctx.tracer, ctx.mask)
        e_m, reference = macro_reference(problem, macro, sensitivity_dbm=threshold, cmap=cmap)
    target = placement.target_ratio if placement.target_ratio is not None else problem.target_from_reference(e_m)
    if not target > 0:
        raise DegenerateSceneError("macro reference covers no outdoor cell; no coverage target to match")
    ctx.report.outputs["macro"] = {
        "position": list(macro.position),
        "height_m": macro.height_m,
        "tx_power_dbm": macro.tx_power_dbm,
        "e_m": e_m,
        "threshold_dbm": threshold,
        "target_ratio": target,
    }
    return cmap, reference, problem.with_target(target)


def _candidates(ctx: RunContext, problem: PlacementProblem, algorithm: Algorithm) -> CandidateCache:
    with ctx.report.phase("candidates"):
        if algorithm == Algorithm.UNIFORM:
            return lazy_candidates(problem, ctx.engine)
        return build_candidates(problem, ctx.engine, ctx.config.threads)


def _place(ctx: RunContext, problem: PlacementProblem, cache: CandidateCache, algorithm: Algorithm) -> PlacementSolution:
    placement = ctx.config.placement
    with ctx.report.phase("placement"):
        return run_algorithm(
            algorithm.value,
            problem,
            cache,
            seed=ctx.config.seed,
            iters_per_station=placement.hill_iters_per_station,
            k_max=placement.uniform_k_max,
            brute_max_candidates=placement.brute_max_candidates,
        )


def _write_solution(ctx, problem, cache: CandidateCache, solution: PlacementSolution, reference) -> None:
    sets = solution_sets(solution, cache, problem.sensitivity_dbm)
    overlap, blind = overlap_and_blind(sets, reference, ctx.mask)
    record = solution_record(solution)
    record.update({"overlap_ratio": overlap, "blind_ratio": blind, "candidates": len(cache)})
    ctx.report.outputs["solution"] = record
    ctx.writer.write_table(ratio_curve_frame(solution), "ratio_curve.csv")
    ctx.writer.write_gray_image(overlay_pixels(sets, reference, ctx.mask), "overlay.pgm")
    if solution.trajectory:
        ctx.writer.write_table(trajectory_frame(solution), "uniform_trajectory.csv")


def run_optimize(ctx: RunContext) -> None:
    _, reference, problem = _macro(ctx)
    algorithm = ctx.config.placement.algorithm
    cache = _candidates(ctx, problem, algorithm)
    try:
        solution = _place(ctx, problem, cache, algorithm)
    except TargetUnreachableError as exc:
        if exc.solution is not None:
            _write_solution(ctx, problem, cache, exc.solution, reference)
        raise
    _write_solution(ctx, problem, cache, solution, reference)

    if ctx.config.placement.class_sweep:
        with ctx.report.phase("class_sweep"):
            rows = class_sweep(problem, ctx.engine, threads=ctx.config.threads)
        ctx.writer.write_table(class_sweep_frame(rows), "class_sweep.csv")
        ctx.report.outputs["class_sweep"] = [asdict(r) for r in rows]


def run_power(ctx: RunContext) -> None:
    power = ctx.config.power
    reports = []
    for s in power.s_values:
        params = power.params(s)
        ctx.writer.write_table(net_ratio_frame(params, power.n_max), f"net_ratio_s{s:g}.csv")
        reports.append(asdict(densification_report(params, power.n_max)))
    ctx.writer.write_table(class_total_frame(power.counts), "class_totals.csv")
    ctx.report.outputs["densification"] = reports
    ctx.report.outputs["class_totals"] = [
        {
            "class": name,
            "count": count,
            "total_w": network_total_power_w(get_station_class(name), count),
            "ratio_vs_single_macro": network_total_power_w(get_station_class(name), count)
            / STATION_CLASSES["macro"].total_power_w,
        }
        for name, count in power.counts.items()
    ]
    ctx.report.outputs["pa_input_w"] = {
        name: class_pa_input_power_w(cls, power.pa_efficiency) for name, cls in STATION_CLASSES.items()
    }
    ctx.report.outputs["table_version"] = TABLE_VERSION


def _network_maps(ctx: RunContext, network: NetworkSection, label: str, cache: Dict[str, Any]) -> List[CoverageMap]:
    grid = ctx.config.grid.to_spec()
    if network.kind == NetworkKind.STATIONS:
        return compute_many(ctx.engine, ctx.scene, grid, ctx.options[label], ctx.tracer, ctx.mask, ctx.config.threads)
    if "greedy" not in cache:
        _, _, problem = _macro(ctx)
        with ctx.report.phase("greedy_network"):
            candidates = build_candidates(problem, ctx.engine, ctx.config.threads)
            try:
                solution = greedy_placement(problem, candidates)
            except TargetUnreachableError as exc:
                logger.warning("Greedy network saturated below target: %s", exc)
                solution = exc.solution
        ctx.report.outputs["greedy_network"] = solution_record(solution)
        template = problem.station_template
        transmitters = [template.at(p) for p in solution.sites]
        cache["greedy"] = compute_many(ctx.engine, ctx.scene, grid, transmitters, ctx.tracer, ctx.mask, ctx.config.threads)
    return cache["greedy"]


def run_ue(ctx: RunContext) -> None:
    ue = ctx.config.ue
    cache: Dict[str, Any] = {}
    with ctx.report.phase("network_maps"):
        net_a = _network_maps(ctx, ue.network_a, "network_a", cache)
        net_b = _network_maps(ctx, ue.network_b, "network_b", cache)
    cfg = ue.to_config(ctx.config.seed, ctx.config.placement.coverage_threshold_dbm)
    with ctx.report.phase("users"):
        result = compare_networks_detailed(net_a, net_b, ctx.mask, cfg)
    ctx.writer.write_table(ue_samples_frame(result.result_a), "ue_a.csv")
    ctx.writer.write_table(ue_samples_frame(result.result_b), "ue_b.csv")
    ctx.writer.write_table(cdf_frame(result.stats_a), "cdf_a.csv")
    ctx.writer.write_table(cdf_frame(result.stats_b), "cdf_b.csv")
    ctx.report.outputs["ue"] = {
        "users": int(len(result.users)),
        "stations_a": len(net_a),
        "stations_b": len(net_b),
        "stats_a": result.stats_a.as_record(),
        "stats_b": result.stats_b.as_record(),
        "mean_delta_db": result.mean_delta_db,
        "paired_delta_db": result.paired_delta_db,
        "reference_delta_db": REFERENCE_DELTA_DB,
    }


def run_ple(ctx: RunContext, emit: Callable[[Dict[str, Any]], None]) -> None:
    ple = ctx.config.ple
    tx: Transmitter = ctx.options["tx"]
    grid = ctx.config.grid.to_spec()
    if ple.mode == PleMode.FIT:
        with ctx.report.phase("coverage_map"):
            cmap = ctx.engine.compute_coverage_map(ctx.scene, grid, tx, ctx.tracer, ctx.mask)
        samples = samples_from_coverage(
            cmap, ctx.mask, ple.max_radius_m, ple.min_distance_m,
            ctx.tracer.sector_start_deg, ctx.tracer.sector_width_deg,
        )
        ctx.writer.write_table(ple_samples_frame(samples), "ple_samples.csv")
        fit = fit_ple(samples)
        record = fit.as_record()
        record.update(reference_rmse(samples, tx, grid.receiver_height_m))
        ctx.report.outputs["fit"] = record
        emit(fit.as_record())
        return

    points, shape = lattice_points(ctx.scene.bounds, ple.heatmap_spacing_m)
    with ctx.report.phase("heatmap"):
        heatmap = ple_heatmap(
            ctx.engine, ctx.scene, grid, points, tx, ctx.tracer,
            max_radius_m=ple.max_radius_m,
            min_samples=ple.min_samples,
            min_distance_m=ple.min_distance_m,
            threads=ctx.config.threads,
            lattice_shape=shape,
        )
    ctx.writer.write_table(heatmap_frame(heatmap), "heatmap.csv")
    ctx.writer.write_gray_image(heatmap_pixels(heatmap), "heatmap.pgm")
    x_mid = (ctx.scene.bounds[0] + ctx.scene.bounds[2]) / 2.0
    ctx.report.outputs["heatmap"] = {
        "candidates": len(heatmap.positions),
        "fitted": heatmap.statuses.count(STATUS_OK),
        "mean_gamma": float(np.nanmean(heatmap.gammas)) if heatmap.statuses.count(STATUS_OK) else None,
        "mean_gamma_left": heatmap.mean_gamma(lambda p: p[0] < x_mid),
        "mean_gamma_right": heatmap.mean_gamma(lambda p: p[0] >= x_mid),
    }
