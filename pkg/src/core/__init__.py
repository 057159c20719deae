"""
Core Domain Logic - densification planner

Scene geometry, coverage algebra, path-loss fitting, placement, power and
UE models.

KEY PRINCIPLE:
    The core never imports adapters. Services that need coverage maps
    receive a `PropagationPort` (src/ports/output) by injection; the
    ray-launching engine is wired in src/factories.py.
"""

from .errors import DensificationError
from .propagation import CoverageMap, CoverageSet, RayTracerConfig, Transmitter
from .scene import Building, CellMask, GridSpec, Scene

__all__ = [
    "DensificationError",
    "Building",
    "CellMask",
    "GridSpec",
    "Scene",
    "CoverageMap",
    "CoverageSet",
    "RayTracerConfig",
    "Transmitter",
]
