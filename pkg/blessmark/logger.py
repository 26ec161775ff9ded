# blessmark/logger.py

import sys
from pathlib import Path

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} - {message}"

logger.remove()

# stdout belongs to command output (watermarks, reports), so the console sink
# writes to stderr.
_console_sink_id = logger.add(sys.stderr, colorize=True, format=CONSOLE_FORMAT, level="INFO")


def set_level(level: str) -> None:
    """Replace the console sink with one at ``level``."""
    global _console_sink_id
    logger.remove(_console_sink_id)
    _console_sink_id = logger.add(
        sys.stderr, colorize=True, format=CONSOLE_FORMAT, level=level
    )


def enable_file_logging(path: Path) -> int:
    """Rotating file output. Opt-in so library use never creates log dirs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return logger.add(
        path,
        rotation="10 MB",
        retention="14 days",
        compression="zip",
        format=FILE_FORMAT,
        level="DEBUG",
    )


__all__ = ["logger", "set_level", "enable_file_logging"]
