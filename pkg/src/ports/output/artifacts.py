"""Artifact Port - Interface for run output writers."""

from pathlib import Path
from typing import Any, Dict, Protocol

import numpy as np
import pandas as pd


class ArtifactWriterPort(Protocol):
    """
    Port for artifact emission.

    Writers must be byte-deterministic: identical inputs produce identical files.
    """

    def write_table(self, frame: pd.DataFrame, path: Path | str) -> Path:
        """Write a table as CSV with the fixed float format."""
        ...

    def write_gray_image(self, pixels: np.ndarray, path: Path | str) -> Path:
        """Write a 2D uint8 array as a binary PGM (P5)."""
        ...

    def write_report(self, report: Dict[str, Any], path: Path | str) -> Path:
        """Write a structured report as sorted-key JSON."""
        ...
