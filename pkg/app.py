"""
Densification Planner Launcher

Convenience launcher for the CLI located in src/adapters/input/cli/main.py

Usage:
    python app.py coverage --config run.json --out out/
    python app.py optimize --config run.json --algorithm greedy
    python app.py power --s 0.01 --count femto=30
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.adapters.input.cli import main

if __name__ == "__main__":
    sys.exit(main())
