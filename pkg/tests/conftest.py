"""Shared fixtures: small scenes, grids and a fast tracer config."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.adapters.output.propagation import RayLaunchingEngine  # noqa: E402
from src.core.placement import CandidateCache  # noqa: E402
from src.core.propagation import RayTracerConfig  # noqa: E402
from src.core.scene import Building, GridSpec, Scene, rasterize  # noqa: E402

GOLDEN = ROOT / "tests" / "golden"


def rect(x0: float, y0: float, x1: float, y1: float, height: float) -> Building:
    return Building(footprint=((x0, y0), (x1, y0), (x1, y1), (x0, y1)), height_m=height)


@pytest.fixture(autouse=True)
def _drop_cli_log_handler():
    """main() installs a stream handler bound to the current stdout; detach it between tests."""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_densify_handler", False):
            root.removeHandler(handler)


@pytest.fixture
def grid() -> GridSpec:
    return GridSpec(cell_size_m=5.0, receiver_height_m=1.5)


@pytest.fixture
def empty_scene() -> Scene:
    return Scene(bounds=(0.0, 0.0, 100.0, 100.0), name="empty-100")


@pytest.fixture
def engine() -> RayLaunchingEngine:
    return RayLaunchingEngine(threads=1, batch_size=512)


@pytest.fixture
def fast_cfg() -> RayTracerConfig:
    return RayTracerConfig(num_samples=2048, max_depth=2, seed=0)


@pytest.fixture
def gadget():
    """
    7x2 cells of 5 m. Row j=1 is one set, row j=0 another; three column
    blocks split both rows 8/4/2, plus a single-cell candidate. Greedy takes
    the blocks (3 stations) where two rows suffice.
    """
    scene = Scene(bounds=(0.0, 0.0, 35.0, 10.0), name="set-cover-gadget")
    mask = rasterize(scene, GridSpec(cell_size_m=5.0))

    top = np.zeros((7, 2), dtype=bool)
    top[:, 1] = True
    bottom = np.zeros((7, 2), dtype=bool)
    bottom[:, 0] = True
    c1 = np.zeros((7, 2), dtype=bool)
    c1[0:4, :] = True
    c2 = np.zeros((7, 2), dtype=bool)
    c2[4:6, :] = True
    c3 = np.zeros((7, 2), dtype=bool)
    c3[6, :] = True
    single = np.zeros((7, 2), dtype=bool)
    single[3, 0] = True
    sets = [top, bottom, c1, c2, c3, single]

    positions = [(2.5 + 5.0 * k, 2.5) for k in range(len(sets))]
    cache = CandidateCache.from_sets(positions, sets, mask)
    return scene, mask, cache
