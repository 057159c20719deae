"""Logging Package"""
from .logger import get_logger, configure_logging, set_run_id

__all__ = ["get_logger", "configure_logging", "set_run_id"]
