import sys

from loguru import logger

from utils.errors import ConfigError


def configure_logging(level: str = "WARNING") -> None:
    """Send diagnostics to stderr; stdout is kept for result documents"""
    try:
        logger.level(level.upper())
    except ValueError:
        raise ConfigError(f"unknown log level {level!r}", {"setting": "PREIMAGE_LOG"})
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}",
    )
