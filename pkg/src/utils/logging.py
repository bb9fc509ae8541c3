"""
Logging configuration and utilities for calib7.
"""
import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Dict

import structlog

from config.settings import settings


def setup_logging(level: str = None):
    """Setup stdlib handlers and the structlog processor chain."""
    level_name = (level or settings.logging.level).upper()

    # Configure root logger
    logger = logging.getLogger()
    logger.setLevel(getattr(logging, level_name))

    # Remove existing handlers
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    # Console handler; stdout is reserved for command output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, level_name))
    console_handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(console_handler)

    # File handler with rotation
    if settings.logging.file_path:
        Path(settings.logging.file_path).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            filename=settings.logging.file_path,
            maxBytes=settings.logging.max_file_size,
            backupCount=settings.logging.backup_count
        )
        file_handler.setLevel(getattr(logging, level_name))
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(message)s"))
        logger.addHandler(file_handler)

    renderer = (
        structlog.processors.JSONRenderer()
        if settings.logging.json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    structlog.get_logger(__name__).debug("logging initialized", level=level_name,
                                         file=settings.logging.file_path)


class VerificationLogger:
    """Specialized logger for check outcomes."""

    def __init__(self):
        self.logger = structlog.get_logger("check")

    def log_check(self, name: str, max_residual: float, tolerance: float, passed: bool, **extra):
        """Log the outcome of a single residual check."""
        if passed:
            self.logger.info("check passed", check=name, max_residual=max_residual,
                             tolerance=tolerance, **extra)
        else:
            self.logger.warning("check failed", check=name, max_residual=max_residual,
                                tolerance=tolerance, **extra)

    def log_excluded(self, name: str, count: int, reason: str):
        """Log nodes excluded from a check (cone vertex, branch points, boundary)."""
        if count:
            self.logger.info("nodes excluded", check=name, count=count, reason=reason)

    def log_summary(self, summary: Dict):
        self.logger.info("run summary", **summary)


# Global logger instance
verification_logger = VerificationLogger()
