"""Optional experiment tracking on Braintrust.

Commands run inside ``braintrust.traced`` spans; until ``start`` initialises a
logger those spans go nowhere, so untracked runs need no credentials.
"""

import logging
import numbers
import os
from typing import Callable, Mapping, Optional

from braintrust import current_span, init_logger, traced

logger = logging.getLogger(__name__)

PROJECT_ENV = "SPIRALRG_TRACKING_PROJECT"
DEFAULT_PROJECT = "spiralrg"

_active = False

__all__ = ["start", "is_active", "log_run", "run_traced", "traced"]


def start(project: Optional[str] = None):
    global _active
    name = project or os.getenv(PROJECT_ENV, DEFAULT_PROJECT)
    tracker = init_logger(project=name)
    _active = True
    logger.info("tracking runs in project %s", name)
    return tracker


def is_active() -> bool:
    return _active


def log_run(config: Mapping[str, object], summary: Mapping[str, object]) -> None:
    """Attach the configuration and the numeric part of a command summary to the current span.

    Must be called while the command's span is open.
    """
    if not _active:
        return
    metrics = {
        key: float(value)
        for key, value in summary.items()
        if isinstance(value, numbers.Real) and not isinstance(value, bool)
    }
    current_span().log(input=dict(config), output=dict(summary), metrics=metrics)


def run_traced(name: str, command: Callable[[], dict], config: Mapping[str, object]) -> dict:
    """Run ``command`` in a span called ``name`` and log its summary there."""

    @traced(name=name)
    def run() -> dict:
        summary = command()
        log_run(config, summary)
        return summary

    return run()
