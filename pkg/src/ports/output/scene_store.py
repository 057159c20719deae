"""Scene Store Port - Interface for scene persistence."""

from pathlib import Path
from typing import Protocol

from src.core.scene import Scene


class SceneStorePort(Protocol):
    """Port for reading and writing scene files."""

    def load_scene(self, path: Path | str) -> Scene:
        """
        Load and validate a scene.

        Raises:
            FileNotFoundError: path does not exist
            SceneParseError: malformed file
            SceneValidationError: geometry invariant violated (names the building index)
        """
        ...

    def save_scene(self, scene: Scene, path: Path | str) -> None:
        """Write the canonical form (sorted keys, 6-decimal coordinates)."""
        ...
