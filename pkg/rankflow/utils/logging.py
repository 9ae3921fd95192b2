"""
RANKFLOW Logging Setup

structlog pipeline rendering to stderr, so result files written to stdout or
the output directory never interleave with log lines.
"""

import logging
import sys

import structlog

from rankflow.config import LogFormat, LogLevel


def _stderr_logger(*args) -> structlog.PrintLogger:
    # looked up per call; sys.stderr may be swapped after configuration
    return structlog.PrintLogger(sys.stderr)


def configure_logging(level: LogLevel = LogLevel.INFO, fmt: LogFormat = LogFormat.CONSOLE) -> None:
    """Install the process-wide structlog configuration."""
    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if LogFormat(fmt) == LogFormat.JSON
        else structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(LogLevel(level).value)
        ),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
