"""Utility helpers for the offloader package."""

from .logger import get_logger, setup_logging

__all__ = ["get_logger", "setup_logging"]
