"""
JSON Scene Store Adapter - scene file ingestion and canonical emission.

Schema (UTF-8 JSON):

    {
      "name": "downtown",
      "bounds": [x_min, y_min, x_max, y_max],
      "buildings": [
        {"footprint": [[x, y], ...], "height_m": 20.0},
        ...
      ]
    }

Coordinates are meters. Footprints may be given in either orientation;
clockwise rings are re-oriented on load with a warning.
"""

import json
from pathlib import Path
from typing import Any, Dict

from src.core.errors import SceneParseError
from src.core.scene import Scene, build_scene, is_ccw
from src.logging import get_logger
from src.ports.output.scene_store import SceneStorePort

logger = get_logger(__name__)

_DECIMALS = 6


def _num(value: float) -> float:
    rounded = round(float(value), _DECIMALS)
    return 0.0 if rounded == 0 else rounded


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    return {
        "name": scene.name,
        "bounds": [_num(v) for v in scene.bounds],
        "buildings": [
            {
                "footprint": [[_num(x), _num(y)] for x, y in b.footprint],
                "height_m": _num(b.height_m),
            }
            for b in scene.buildings
        ],
    }


def scene_from_dict(data: Any, source: str = "<memory>") -> Scene:
    if not isinstance(data, dict):
        raise SceneParseError(f"{source}: top level must be an object")
    try:
        bounds = [float(v) for v in data["bounds"]]
        raw_buildings = data.get("buildings", [])
        name = str(data.get("name", Path(source).stem))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneParseError(f"{source}: missing or malformed field ({exc})") from exc
    if len(bounds) != 4:
        raise SceneParseError(f"{source}: bounds must have 4 numbers, got {len(bounds)}")
    if not isinstance(raw_buildings, list):
        raise SceneParseError(f"{source}: buildings must be an array")

    parsed = []
    for idx, entry in enumerate(raw_buildings):
        try:
            footprint = [(float(x), float(y)) for x, y in entry["footprint"]]
            height = float(entry["height_m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneParseError(f"{source}: building {idx} is malformed ({exc})") from exc
        if len(footprint) >= 3 and not is_ccw(footprint):
            logger.warning("%s: building %d footprint is clockwise, re-oriented", source, idx)
        parsed.append((footprint, height))
    return build_scene(bounds, parsed, name)


class JsonSceneStore(SceneStorePort):
    """Scene persistence in the canonical JSON schema."""

    def load_scene(self, path: Path | str) -> Scene:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"scene file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SceneParseError(f"{path}: invalid JSON ({exc})") from exc
        scene = scene_from_dict(data, source=str(path))
        logger.info("Loaded scene %s from %s (%d buildings)", scene.name, path, len(scene.buildings))
        return scene

    def save_scene(self, scene: Scene, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_scene(scene), encoding="utf-8")
        logger.info("Saved scene %s to %s", scene.name, path)


def dumps_scene(scene: Scene) -> str:
    """Canonical text: sorted keys, coordinates rounded to 6 decimals, trailing newline."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, indent=2) + "\n"
