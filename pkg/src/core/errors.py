"""Domain exceptions for the densification planner."""

from __future__ import annotations

from typing import Any, Optional


class DensificationError(Exception):
    """Base class for all planner errors."""


class SceneParseError(DensificationError, ValueError):
    """Scene file is not valid JSON or misses required fields."""


class SceneValidationError(DensificationError, ValueError):
    """A scene violates a geometric invariant."""

    def __init__(self, message: str, building_index: Optional[int] = None):
        if building_index is not None:
            message = f"building {building_index}: {message}"
        super().__init__(message)
        self.building_index = building_index


class GridTooLargeError(DensificationError, ValueError):
    pass


class SceneGenerationError(DensificationError, ValueError):
    """Synthetic generator could not place the requested buildings."""


class GridMismatchError(DensificationError, ValueError):
    pass


class DegenerateSceneError(DensificationError, ValueError):
    """Scene has no outdoor cells to measure coverage over."""


class InsufficientSamplesError(DensificationError, ValueError):
    pass


class NoCandidatesError(DensificationError, ValueError):
    pass


class TooManyCandidatesError(DensificationError, ValueError):
    pass


class TargetUnreachableError(DensificationError, RuntimeError):
    """Placement saturated below the target; `solution` holds the saturated result."""

    def __init__(self, message: str, solution: Any = None):
        super().__init__(message)
        self.solution = solution


class UncoveredUserError(DensificationError, ValueError):
    pass


class EmptyRegionError(DensificationError, ValueError):
    """No cell is available to place users in."""
