"""Rotating log files under the configured log directory."""

import logging
import threading
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from expected_rewards.infrastructure.config import LoggingConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_file_handler: Optional[RotatingFileHandler] = None
_handler_lock = threading.RLock()


def log_file_path(config: LoggingConfig) -> Path:
    return config.log_directory / f"{config.file_prefix}.log"


def attach_file_handler(config: LoggingConfig) -> Path:
    """Send root-logger records to ``<log_directory>/<file_prefix>.log``.

    The file rotates at ``max_file_size_mb`` and keeps ``backup_count`` old files.
    A handler attached by an earlier call is closed first.
    """
    global _file_handler

    path = log_file_path(config)
    with _handler_lock:
        detach_file_handler()
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(
            path,
            maxBytes=config.max_file_size_mb * 1024 * 1024,
            backupCount=config.backup_count,
            encoding="utf-8",
        )
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger().addHandler(handler)
        _file_handler = handler

    logger.info(f"Logging to {path}")
    return path


def detach_file_handler() -> None:
    global _file_handler

    with _handler_lock:
        if _file_handler is not None:
            logging.getLogger().removeHandler(_file_handler)
            _file_handler.close()
            _file_handler = None


def active_log_file() -> Optional[Path]:
    with _handler_lock:
        return None if _file_handler is None else Path(_file_handler.baseFilename)
