"""Propagation Port - Interface for coverage-map engines."""

from typing import Optional, Protocol

from src.core.propagation import CoverageMap, RayTracerConfig, Transmitter
from src.core.scene import CellMask, GridSpec, Scene


class PropagationPort(Protocol):
    """
    Port for propagation engines.

    An engine turns (scene, grid, transmitter, tracer config) into a
    per-cell best-path loss map. Output must be a pure function of the
    inputs, independent of any internal parallelism.
    """

    def compute_coverage_map(
        self,
        scene: Scene,
        grid: GridSpec,
        tx: Transmitter,
        cfg: RayTracerConfig,
        mask: Optional[CellMask] = None,
    ) -> CoverageMap:
        """
        Compute the coverage map of one transmitter.

        Args:
            scene: Validated scene
            grid: Grid spec (rasterized against scene bounds)
            tx: Transmitter inside the scene bounds
            cfg: Ray tracer configuration (seed included)
            mask: Pre-rasterized cell mask, rasterized on demand when None

        Returns:
            CoverageMap with NaN for unreached and building cells
        """
        ...
