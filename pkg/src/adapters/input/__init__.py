"""
Input Adapters (Primary/Driving Adapters)

Concrete implementations that DRIVE the application. The command line is
the only user-facing surface:

- cli/: argparse subcommands (coverage, optimize, power, ue, ple, scene)

These adapters:
- Translate flags and config files into core operations
- Map failures to exit codes
"""

__all__ = []
