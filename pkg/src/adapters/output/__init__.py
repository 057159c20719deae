"""
Output Adapters (Secondary/Driven Adapters)

Concrete implementations of the output ports:
- propagation: ray-launching engine behind PropagationPort
- scene_store: JSON scene files behind SceneStorePort
- export: CSV / PGM / JSON writers behind ArtifactWriterPort
"""

from .export import FileArtifactWriter
from .propagation import RayLaunchingEngine
from .scene_store import JsonSceneStore

__all__ = [
    "FileArtifactWriter",
    "RayLaunchingEngine",
    "JsonSceneStore",
]
