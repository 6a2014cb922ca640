"""(c) 2025, hybrid-sape authors.
"""

import logging
import os
import sys
from typing import Dict, Optional

LOG_FORMAT = "%(asctime)s 🕒 [%(levelname)s] %(message)s"


class ColoredFormatter(logging.Formatter):
    """Colours each record by level; plain text when ``use_color`` is off."""

    grey = "\x1b[38;21m"
    blue = "\x1b[38;5;39m"
    yellow = "\x1b[38;5;226m"
    red = "\x1b[38;5;196m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"

    def __init__(self, fmt: str = LOG_FORMAT, use_color: bool = True):
        super().__init__(fmt)
        self.use_color = use_color
        colors = {
            logging.DEBUG: self.grey,
            logging.INFO: self.blue,
            logging.WARNING: self.yellow,
            logging.ERROR: self.red,
            logging.CRITICAL: self.bold_red,
        }
        self._formatters: Dict[int, logging.Formatter] = {
            level: logging.Formatter(color + fmt + self.reset if use_color else fmt)
            for level, color in colors.items()
        }

    def format(self, record: logging.LogRecord) -> str:
        formatter = self._formatters.get(record.levelno)
        if formatter is None:
            return super().format(record)
        return formatter.format(record)


def _color_enabled() -> bool:
    setting = os.getenv("SAPE_LOG_COLOR", "auto").lower()
    if setting in ("0", "false", "no", "off"):
        return False
    if setting in ("1", "true", "yes", "on"):
        return True
    return sys.stderr.isatty()


def setup_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """Set up and return a configured logger instance.

    The level defaults to ``SAPE_LOG_LEVEL`` (INFO when unset or unknown).
    """
    logger = logging.getLogger(name)
    level_name = (level or os.getenv("SAPE_LOG_LEVEL", "INFO")).upper()
    numeric = getattr(logging, level_name, logging.INFO)
    logger.setLevel(numeric)

    # Modules may be imported more than once (tests, worker processes)
    existing = [h for h in logger.handlers if getattr(h, "_sape_handler", False)]
    if existing:
        for handler in existing:
            handler.setLevel(numeric)
        return logger

    handler = logging.StreamHandler()
    handler.setLevel(numeric)
    handler._sape_handler = True
    handler.setFormatter(ColoredFormatter(LOG_FORMAT, use_color=_color_enabled()))
    logger.addHandler(handler)
    logger.propagate = False

    return logger
