"""
Ports Package - Interfaces for Hexagonal Architecture

Ports define contracts between the core domain and external systems.
Only driven ports exist here (output/): the coverage engine, scene
storage and artifact writing. The CLI drives the core directly.
"""

from .output import *
