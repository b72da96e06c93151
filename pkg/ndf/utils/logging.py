"""
Structured logging configuration.
"""
import logging
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Iterator, Optional

from pythonjsonlogger import jsonlogger

from ndf.errors import NdfError

_stage: ContextVar[Optional[str]] = ContextVar('ndf_stage', default=None)


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """Custom JSON formatter with extra fields."""
    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        if not log_record.get('timestamp'):
            log_record['timestamp'] = datetime.now(timezone.utc).isoformat()
        stage = _stage.get()
        if stage:
            log_record['stage'] = stage
        log_record['level'] = record.levelname
        log_record['logger'] = record.name


@contextmanager
def log_stage(name: str) -> Iterator[None]:
    """Tag every record emitted inside the block, and any NdfError leaving it, with `stage=name`."""
    token = _stage.set(name)
    try:
        yield
    except NdfError as e:
        if e.stage is None:
            e.stage = name
        raise
    finally:
        _stage.reset(token)


def current_stage() -> Optional[str]:
    return _stage.get()


def configure_logging(config) -> None:
    """Configure logging from a config class (see config.py)."""
    log_level = 'DEBUG' if getattr(config, 'DEBUG', False) else getattr(config, 'LOG_LEVEL', 'INFO')
    log_format = getattr(config, 'LOG_FORMAT', 'json')
    log_file = getattr(config, 'LOG_FILE', None)

    handlers = []

    # Diagnostics go to stderr; stdout carries key=value results
    console_handler = logging.StreamHandler(sys.stderr)
    if log_format == 'json':
        formatter = CustomJsonFormatter('%(timestamp)s %(level)s %(name)s %(message)s')
    else:
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
    console_handler.setFormatter(formatter)
    handlers.append(console_handler)

    # File handler if specified
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    logging.basicConfig(level=log_level, handlers=handlers, force=True)
