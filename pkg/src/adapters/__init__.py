"""
Adapters Package - Concrete Implementations

Adapters connect the core domain to the outside world.
They are split into:
- input/: Primary/Driving adapters (CLI)
- output/: Secondary/Driven adapters (propagation engine, scene files, artifact writers)
"""
