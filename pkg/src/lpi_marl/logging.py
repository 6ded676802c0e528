"""Logging configuration for LPI-MARL."""

from __future__ import annotations

import logging

ROOT_LOGGER = "lpi_marl"


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance for the given module name.

    Handlers live on the package root logger so that ``set_level`` affects
    every module at once.

    Args:
        name: Module name (typically __name__)

    Returns:
        Configured logger instance
    """
    root = logging.getLogger(ROOT_LOGGER)

    # Only configure if no handlers exist (avoid duplicate configuration)
    if not root.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        handler.setFormatter(formatter)
        root.addHandler(handler)
        root.setLevel(logging.INFO)

    return logging.getLogger(name)


def set_level(level: str | int) -> None:
    """Set the level of the package root logger.

    Args:
        level: Level name ("DEBUG", "INFO", ...) or numeric level
    """
    if isinstance(level, str):
        level = level.upper()
    get_logger(ROOT_LOGGER).setLevel(level)


def log_exception(logger: logging.Logger, exc: BaseException, context: str = "") -> None:
    """Log an exception with context.

    Args:
        logger: Logger instance
        exc: Exception to log
        context: Additional context about where the exception occurred
    """
    if context:
        logger.error(f"{context}: {type(exc).__name__}: {exc}", exc_info=exc)
    else:
        logger.error(f"{type(exc).__name__}: {exc}", exc_info=exc)
