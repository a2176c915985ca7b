import logging
import logging.config
import sys
from typing import Optional

from qdiana.utils.enums import LogLevel

LEVEL_COLORS = {
    LogLevel.DEBUG.value: "\033[36m",
    LogLevel.INFO.value: "\033[32m",
    LogLevel.WARNING.value: "\033[33m",
    LogLevel.ERROR.value: "\033[31m",
    "CRITICAL": "\033[35m",
}
RESET = "\033[0m"

# progress lines of long runs and suites; no timestamps when piped into files
TTY_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
PLAIN_FORMAT = "%(levelname)s %(name)s: %(message)s"


class ColoredFormatter(logging.Formatter):
    """Colors the level name for terminal output"""

    def format(self, record):
        levelname = record.levelname
        color = LEVEL_COLORS.get(levelname)
        if color:
            record.levelname = f"{color}{levelname}{RESET}"
        try:
            return super().format(record)
        finally:
            record.levelname = levelname


def get_log_config(level: str = LogLevel.INFO.value, colored: bool = True) -> dict:
    """dictConfig for the CLI: one stderr handler, so stdout stays free for CSV rows and PASS/FAIL lines."""
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "colored": {
                "()": ColoredFormatter,
                "format": TTY_FORMAT,
                "datefmt": "%H:%M:%S"
            },
            "plain": {
                "format": PLAIN_FORMAT
            }
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": "DEBUG",
                "formatter": "colored" if colored else "plain",
                "stream": "ext://sys.stderr"
            }
        },
        "root": {
            "level": level,
            "handlers": ["console"]
        },
    }


def setup_root_logger(level: Optional[str] = None, colored: Optional[bool] = None):
    """Install the CLI logging config; level defaults to settings.runtime.log_level."""
    if level is None:
        from config import settings  # noqa

        level = settings.runtime.log_level.value
    if colored is None:
        colored = sys.stderr.isatty()

    logging.config.dictConfig(get_log_config(level, colored))
