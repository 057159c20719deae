"""
Output Ports (Secondary/Driven Ports)

Define what the planner NEEDS from engines and storage.
Core services depend on these interfaces; adapters implement them.
"""

from .propagation import PropagationPort
from .scene_store import SceneStorePort
from .artifacts import ArtifactWriterPort

__all__ = [
    "PropagationPort",
    "SceneStorePort",
    "ArtifactWriterPort",
]
