"""CLI Adapter - argparse front end (`python app.py <command>`)."""

from .main import build_parser, main

__all__ = ["build_parser", "main"]
