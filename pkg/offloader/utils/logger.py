"""Utility helpers for consistent logging configuration."""

from __future__ import annotations

import logging
from typing import Optional

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"


def setup_logging(level: int = logging.INFO) -> None:
    """Configure application-wide logging.

    If the root logger already has handlers the function returns without
    touching them or the root level.
    """

    if logging.getLogger().handlers:
        return

    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return a module or class specific logger instance."""

    if not name:
        return logging.getLogger("offloader")
    if name == "offloader" or name.startswith("offloader."):
        return logging.getLogger(name)
    return logging.getLogger(f"offloader.{name}")
