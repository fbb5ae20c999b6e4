import logging
import sys
from typing import Optional

_active_level: Optional[str] = None


def _configured_level() -> str:
    from eegid.core.config import settings

    return settings.LOG_LEVEL


def get_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """
    Get a configured logger instance.

    Args:
        name: The name of the logger (usually __name__)
        level: Optional level name; defaults to the active run level, then Settings.LOG_LEVEL

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger(name)

    # Only configure if handlers haven't been added yet
    if not logger.handlers:
        ch = logging.StreamHandler(sys.stdout)
        formatter = logging.Formatter(
            '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
            datefmt='%H:%M:%S'
        )
        ch.setFormatter(formatter)
        logger.addHandler(ch)

        # Handlers stay local to the named logger
        logger.propagate = False

    resolved = (level or _active_level or _configured_level()).upper()
    logger.setLevel(resolved)
    for handler in logger.handlers:
        handler.setLevel(resolved)

    return logger


def set_log_level(level: str) -> None:
    """Apply one level to every eegid logger created so far and to later ones"""
    global _active_level
    _active_level = level.upper()
    for name in list(logging.root.manager.loggerDict):
        if name.startswith("eegid"):
            get_logger(name, _active_level)
