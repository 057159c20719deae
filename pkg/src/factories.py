"""
Dependency Injection / Factory Functions

This module creates and wires together all dependencies (adapters)
based on configuration:

- Factories read configuration
- Create appropriate adapters (implementations)
- Return them as ports (interfaces)
- Core services receive ports, not concrete adapters
"""

from __future__ import annotations

from pathlib import Path

from src.adapters.output.export import FileArtifactWriter
from src.adapters.output.propagation import RayLaunchingEngine
from src.adapters.output.scene_store import JsonSceneStore
from src.config import settings
from src.config.run_config import RunConfig
from src.core.scene import Scene
from src.core.synthetic import generate_synthetic_scene
from src.logging import get_logger
from src.ports.output import ArtifactWriterPort, PropagationPort, SceneStorePort

logger = get_logger(__name__)


def create_propagation_engine(threads: int = 1, batch_size: int = settings.tracer.batch_size) -> PropagationPort:
    """
    Create the coverage-map engine.

    Args:
        threads: Worker threads for ray batches; never changes the output
        batch_size: Rays traced per vectorized batch

    Returns:
        Engine implementing PropagationPort
    """
    logger.info("Using ray-launching engine (threads=%d, batch=%d)", threads, batch_size)
    return RayLaunchingEngine(threads=threads, batch_size=batch_size)


def create_scene_store() -> SceneStorePort:
    return JsonSceneStore()


def create_artifact_writer(out_dir: Path | str) -> ArtifactWriterPort:
    return FileArtifactWriter(out_dir, float_format=settings.export.float_format)


def resolve_scene(config: RunConfig, store: SceneStorePort | None = None) -> Scene:
    """Load the configured scene file or run the configured synthetic generator."""
    source = config.scene
    if source.path is not None:
        return (store or create_scene_store()).load_scene(source.path)
    synthetic = source.synthetic
    return generate_synthetic_scene(synthetic.kind.value, synthetic.to_params(), synthetic.seed)
