import logging
import logging.handlers
import os
import sys
import structlog
from typing import Optional, Any
from ..config import settings

class CustomLogger:
    """Logger wrapper accepting an ``error`` argument alongside structlog-style kwargs"""

    def __init__(self, name: Optional[str] = None):
        self._struct_logger = structlog.get_logger(name or __name__)

    def _emit(self, level: str, message: str, error: Optional[Any], **kwargs):
        if error is not None:
            kwargs["error"] = str(error)
        getattr(self._struct_logger, level)(message, **kwargs)

    def debug(self, message: str, error: Optional[Any] = None, **kwargs):
        self._emit("debug", message, error, **kwargs)

    def info(self, message: str, error: Optional[Any] = None, **kwargs):
        self._emit("info", message, error, **kwargs)

    def warning(self, message: str, error: Optional[Any] = None, **kwargs):
        self._emit("warning", message, error, **kwargs)

    def error(self, message: str, error: Optional[Any] = None, **kwargs):
        self._emit("error", message, error, **kwargs)

    def exception(self, message: str, **kwargs):
        """Error log with stack info"""
        self._struct_logger.exception(message, **kwargs)

def setup_logging(level: Optional[str] = None):
    """Configure stdlib handlers and structlog.

    Console output goes to stderr so stdout stays free for reports and CSV.
    """
    level_name = (level or settings.log_level).upper()
    log_level = getattr(logging, level_name, logging.INFO)

    handlers = []

    if settings.log_file:
        log_dir = os.path.dirname(settings.log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            settings.log_file,
            maxBytes=settings.log_max_size,
            backupCount=settings.log_backup_count,
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        handlers.append(file_handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    handlers.append(console_handler)

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    logging.getLogger("setup").debug("Logging configured - level %s", level_name)

def get_logger(name: Optional[str] = None) -> CustomLogger:
    """Get a CustomLogger"""
    return CustomLogger(name)
