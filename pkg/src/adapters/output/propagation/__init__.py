"""Propagation Adapters - Concrete implementations of PropagationPort."""

from .ray_launcher import RayLaunchingEngine, compute_many, launch_azimuths

__all__ = [
    "RayLaunchingEngine",
    "compute_many",
    "launch_azimuths",
]
