"""Scene Store Adapters - Concrete implementations of SceneStorePort."""

from .json_store import JsonSceneStore, dumps_scene, scene_from_dict, scene_to_dict

__all__ = [
    "JsonSceneStore",
    "dumps_scene",
    "scene_from_dict",
    "scene_to_dict",
]
