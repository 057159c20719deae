"""
Command-line entry point.

Exit codes:
    0  success
    1  compute failure; artifacts written so far plus a failed report.json
    2  config or validation failure; nothing written
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from src.config import settings
from src.config.settings import AppConfig
from src.config.run_config import RunConfig, SceneKind, load_run_config
from src.core.errors import DensificationError, SceneParseError, SceneValidationError
from src.core.reports import RunReport
from src.core.scene import rasterize
from src.core.synthetic import SyntheticParams, generate_synthetic_scene
from src.factories import create_artifact_writer, create_scene_store
from src.logging import configure_logging, get_logger, set_run_id

from . import commands

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_INVALID = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Run config JSON file")
    parser.add_argument("--scene", type=str, help="Scene JSON file (overrides the config's scene)")
    parser.add_argument("--out", type=str, help="Output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="Run seed (overrides seed)")
    parser.add_argument("--threads", type=int, help="Worker threads; never changes output bytes")
    parser.add_argument("--log-level", default=settings.app.log_level, help="Logging level")
    parser.add_argument("--log-json", action="store_true", help="Emit logs as JSON lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densify",
        description="Coverage maps, PLE fits, small-cell placement and power analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coverage", help="Coverage map for the configured station")
    _add_common(p)

    p = sub.add_parser("optimize", help="Place small cells to match the macro reference")
    _add_common(p)
    p.add_argument("--algorithm", choices=["greedy", "hill", "uniform", "brute"])
    p.add_argument("--class-sweep", action="store_true", help="Also run greedy for every station class")

    p = sub.add_parser("power", help="Densification power sweep and class totals")
    _add_common(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--s", type=float, action="append", dest="s_values", help="Interface fraction (repeatable)")
    p.add_argument("--n-max", type=int)
    p.add_argument("--count", action="append", default=None, metavar="CLASS=N", help="Station count (repeatable)")

    p = sub.add_parser("ue", help="Paired uplink power comparison of two networks")
    _add_common(p)
    p.add_argument("--users", type=int)

    p = sub.add_parser("ple", help="Path-loss exponent fit or heatmap")
    _add_common(p)
    p.add_argument("--mode", choices=["fit", "heatmap"])

    p = sub.add_parser("scene", help="Scene file utilities")
    scene_sub = p.add_subparsers(dest="scene_command", required=True)
    v = scene_sub.add_parser("validate", help="Load and validate a scene file")
    _add_common(v)
    v.add_argument("path", nargs="?", help="Scene file (defaults to --scene or the config's scene)")
    g = scene_sub.add_parser("generate", help="Write a synthetic scene")
    _add_common(g)
    g.add_argument("--kind", choices=[k.value for k in SceneKind], default=SceneKind.UNIFORM_CITY.value)
    g.add_argument("--density", type=float)
    g.add_argument("--width", type=float)
    g.add_argument("--depth", type=float)
    g.add_argument("--name", default="scene.json", help="File name inside --out")
    return parser


def _parse_counts(items: Optional[List[str]]) -> Optional[Dict[str, int]]:
    if not items:
        return None
    counts = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--count expects CLASS=N, got {item!r}")
        counts[name.strip()] = int(value)
    return counts


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with flag overrides applied; flags win."""
    if args.config is not None:
        config = load_run_config(args.config)
        data = config.model_dump()
    else:
        data = {"scene": {"synthetic": {"kind": SceneKind.EMPTY.value}}}
    if args.scene is not None:
        data["scene"] = {"path": args.scene}

    def section(name: str) -> Dict[str, Any]:
        return data.setdefault(name, {})

    command = args.command
    if command == "optimize":
        if args.algorithm:
            section("placement")["algorithm"] = args.algorithm
        if args.class_sweep:
            section("placement")["class_sweep"] = True
    elif command == "power":
        if args.gamma is not None:
            section("power")["gamma"] = args.gamma
        if args.s_values:
            section("power")["s_values"] = args.s_values
        if args.n_max is not None:
            section("power")["n_max"] = args.n_max
        counts = _parse_counts(args.count)
        if counts is not None:
            section("power")["counts"] = counts
    elif command == "ue" and args.users is not None:
        section("ue")["num_users"] = args.users
    elif command == "ple" and args.mode:
        section("ple")["mode"] = args.mode

    config = RunConfig.model_validate(data)
    return config.with_overrides(seed=args.seed, threads=args.threads, output_dir=args.out)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def _invalid(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INVALID


_PREPARE: Dict[str, Callable[[RunConfig], "commands.RunContext"]] = {
    "coverage": commands.prepare_coverage,
    "optimize": commands.prepare_optimize,
    "power": commands.prepare_power,
    "ue": commands.prepare_ue,
    "ple": commands.prepare_ple,
}


def _emit(record: Dict[str, Any]) -> None:
    print(json.dumps(record, sort_keys=True))


def _run_command(ctx: "commands.RunContext") -> None:
    if ctx.command == "coverage":
        commands.run_coverage(ctx)
    elif ctx.command == "optimize":
        commands.run_optimize(ctx)
    elif ctx.command == "power":
        commands.run_power(ctx)
    elif ctx.command == "ue":
        commands.run_ue(ctx)
    elif ctx.command == "ple":
        commands.run_ple(ctx, _emit)


def _scene_command(args: argparse.Namespace, config: RunConfig) -> int:
    store = create_scene_store()
    if args.scene_command == "validate":
        path = args.path or config.scene.path
        if path is None:
            return _invalid("scene validate needs a scene file path")
        scene = store.load_scene(path)
        mask = rasterize(scene, config.grid.to_spec(), max_cells=config.grid.max_cells)
        summary = {
            "name": scene.name,
            "buildings": len(scene.buildings),
            "building_area_m2": scene.building_area_m2(),
            "grid": list(mask.grid.shape),
            "outdoor_cells": mask.outdoor_count,
        }
        report = RunReport(command="scene validate", config=config.echo(), outputs={"scene": summary})
        create_artifact_writer(config.output_dir).write_report(report.as_dict(), "report.json")
        _emit(summary)
        return EXIT_OK

    defaults = SyntheticParams()
    params = SyntheticParams(
        width_m=args.width or defaults.width_m,
        depth_m=args.depth or defaults.depth_m,
        density=defaults.density if args.density is None else args.density,
    )
    scene = generate_synthetic_scene(args.kind, params, config.seed)
    target = Path(config.output_dir) / args.name
    target.parent.mkdir(parents=True, exist_ok=True)
    store.save_scene(scene, target)
    report = RunReport(
        command="scene generate",
        config=config.echo(),
        outputs={"scene": {"path": str(target), "kind": args.kind, "buildings": len(scene.buildings)}},
    )
    create_artifact_writer(config.output_dir).write_report(report.as_dict(), "report.json")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(AppConfig(log_level=args.log_level).log_level_int, json_format=args.log_json)

    try:
        config = resolve_config(args)
    except ValidationError as exc:
        return _invalid(_format_validation(exc))
    except (FileNotFoundError, ValueError) as exc:
        return _invalid(str(exc))
    set_run_id(f"{args.command}-{config.seed}")

    if args.command == "scene":
        try:
            return _scene_command(args, config)
        except FileNotFoundError as exc:
            return _invalid(str(exc))
        except (SceneParseError, SceneValidationError, ValueError) as exc:
            return _invalid(str(exc))

    try:
        ctx = _PREPARE[args.command](config)
    except ValidationError as exc:
        return _invalid(_format_validation(exc))
    except (FileNotFoundError, ValueError) as exc:
        return _invalid(str(exc))

    commands.start(ctx)
    try:
        _run_command(ctx)
    except DensificationError as exc:
        logger.error("%s failed: %s", args.command, exc)
        ctx.finish(status="failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    ctx.finish()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
