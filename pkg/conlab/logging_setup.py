import logging, sys
from typing import Optional, TextIO

from .config import settings

def setup_logging(level: Optional[str] = None, stream: Optional[TextIO] = None):
    logger = logging.getLogger("conlab")
    logger.setLevel((level or settings.LOG_LEVEL).upper())
    handler = logging.StreamHandler(stream or sys.stdout)
    fmt = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
    handler.setFormatter(logging.Formatter(fmt))
    logger.handlers.clear()
    logger.addHandler(handler)
    logger.propagate = False
    return logger
