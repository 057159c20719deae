import json
import logging
import sys
from datetime import datetime, timezone
from typing import Optional


class RunContextFilter(logging.Filter):
    """Add run_id to log records."""

    def __init__(self):
        super().__init__()
        self.run_id: Optional[str] = None

    def filter(self, record):
        if not hasattr(record, "run_id"):
            record.run_id = self.run_id or "N/A"
        return True


class StructuredFormatter(logging.Formatter):
    """Human-readable line by default, one JSON object per line when json_format is set."""

    def __init__(self, json_format: bool = False):
        super().__init__(datefmt="%Y-%m-%d %H:%M:%S")
        self.json_format = json_format

    def format(self, record):
        log_data = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "name": record.name,
            "run_id": getattr(record, "run_id", "N/A"),
            "message": record.getMessage(),
        }
        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        if self.json_format:
            return json.dumps(log_data)
        line = (
            f"{self.formatTime(record, self.datefmt)} | {log_data['level']} | {log_data['name']} | "
            f"[run_id={log_data['run_id']}] {log_data['message']}"
        )
        if "exception" in log_data:
            line += "\n" + log_data["exception"]
        return line


_run_filter = RunContextFilter()


def configure_logging(level: int = logging.INFO, json_format: bool = False) -> None:
    """Configure application-wide logging with a concise formatter."""
    root = logging.getLogger()
    root.setLevel(level)
    # CLI tests call main() repeatedly in one process; keep a single handler.
    for handler in root.handlers:
        if getattr(handler, "_densify_handler", False):
            handler.setFormatter(StructuredFormatter(json_format=json_format))
            return
    handler = logging.StreamHandler(sys.stdout)
    handler._densify_handler = True
    handler.addFilter(_run_filter)
    handler.setFormatter(StructuredFormatter(json_format=json_format))
    root.addHandler(handler)


def set_run_id(run_id: Optional[str]) -> None:
    """Set the run id stamped on all subsequent log messages."""
    _run_filter.run_id = run_id


def get_logger(name: Optional[str] = None) -> logging.Logger:
    return logging.getLogger(name)
