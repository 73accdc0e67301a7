import sys
from functools import partialmethod

from loguru import logger

LOG_FORMAT = "[ <level>{level: <8}</level> ] {message}"


def configure_logger(verbose: bool = False) -> None:
    """
    Routes log records to the current ``sys.stderr``.

    Args:
        verbose (bool): Log DEBUG records (stage details and timings) too. Defaults to INFO.
    """
    logger.remove()
    logger.add(
        sys.stderr,
        backtrace=False,
        colorize=None,
        format=LOG_FORMAT,
        level="DEBUG" if verbose else "INFO",
    )


configure_logger()

# Add a custom level to the logger
logger.level("SKIP", no=27, color="<light-black><bold>", icon="⏭️")
logger.__class__.skip = partialmethod(logger.__class__.log, "SKIP")  # type: ignore
