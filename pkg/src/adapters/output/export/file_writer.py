"""
File Artifact Adapter - CSV, PGM and JSON emission.

Everything written here is byte-deterministic: fixed float format, fixed
line terminator, sorted JSON keys.
"""

import json
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from src.config import settings
from src.logging import get_logger
from src.ports.output.artifacts import ArtifactWriterPort

logger = get_logger(__name__)


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Binary PGM (P5), 8-bit, rows top to bottom."""
    if pixels.ndim != 2:
        raise ValueError(f"PGM needs a 2D array, got shape {pixels.shape}")
    img = np.ascontiguousarray(pixels, dtype=np.uint8)
    height, width = img.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + img.tobytes()


class FileArtifactWriter(ArtifactWriterPort):
    """Writes run artifacts below an output directory."""

    def __init__(self, out_dir: Path | str, float_format: str = settings.export.float_format):
        self.out_dir = Path(out_dir)
        self.float_format = float_format
        self.written: list[Path] = []

    def _target(self, path: Path | str) -> Path:
        target = self.out_dir / path
        target.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(target)
        return target

    def write_table(self, frame: pd.DataFrame, path: Path | str) -> Path:
        target = self._target(path)
        frame.to_csv(
            target,
            index=False,
            float_format=self.float_format,
            na_rep="",
            lineterminator="\n",
        )
        logger.info("Wrote %s (%d rows)", target, len(frame))
        return target

    def write_gray_image(self, pixels: np.ndarray, path: Path | str) -> Path:
        target = self._target(path)
        target.write_bytes(encode_pgm(pixels))
        logger.info("Wrote %s (%dx%d)", target, pixels.shape[1], pixels.shape[0])
        return target

    def write_report(self, report: Dict[str, Any], path: Path | str) -> Path:
        target = self._target(path)
        target.write_text(
            json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n",
            encoding="utf-8",
        )
        logger.info("Wrote %s", target)
        return target
