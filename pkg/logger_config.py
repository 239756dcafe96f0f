"""
Logging setup shared by the command line and the numerical modules.

Records go to stderr; stdout carries only command output such as the
prcheck diagnostics. The level comes from LOG_LEVEL and can be changed
later for every package logger with set_level (the --log-level flag).
"""
import logging
import os
import sys
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_configured = set()


def _level_from_env() -> int:
    return getattr(logging, os.environ.get('LOG_LEVEL', 'INFO').upper(), logging.INFO)


def _stderr_handler(level: int) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    return handler


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger that writes formatted records to stderr.

    Args:
        name: Logger name, usually the caller's __name__

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name or __name__)

    # One handler per logger, however often a module asks for it
    if logger.name in _configured:
        return logger

    level = _level_from_env()
    logger.setLevel(level)
    logger.addHandler(_stderr_handler(level))
    # Records stop here; the root logger would print them twice
    logger.propagate = False
    _configured.add(logger.name)
    return logger


def set_level(level: str) -> None:
    """Apply `level` to every logger created through get_logger."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    for name in _configured:
        logger = logging.getLogger(name)
        logger.setLevel(numeric)
        for handler in logger.handlers:
            handler.setLevel(numeric)
