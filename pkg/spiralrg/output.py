"""CSV datasets and text dumps with '#' header lines, written atomically."""

import datetime
import logging
import os
import tempfile
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, TextIO

import pandas as pd

from spiralrg import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def header_lines(echo: Mapping[str, object], extra: Optional[Mapping[str, object]] = None,
                 timestamp: bool = True) -> Sequence[str]:
    lines = [f"# spiralrg {__version__}"]
    lines += [f"# {key}={echo[key]}" for key in sorted(echo)]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"# timestamp={now}")
    return lines


def _atomic(path, body: Callable[[TextIO], None]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        mode="w", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False, newline=""
    )
    try:
        with handle:
            body(handle)
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    return path


def write_csv(path, frame: pd.DataFrame, echo: Mapping[str, object],
              extra: Optional[Mapping[str, object]] = None, timestamp: bool = True) -> Path:
    """Write ``frame`` below the header; the file appears only once complete."""
    def body(handle):
        for line in header_lines(echo, extra, timestamp):
            handle.write(line + "\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT)

    path = _atomic(path, body)
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_text(path, text: str, echo: Mapping[str, object], timestamp: bool = True) -> Path:
    def body(handle):
        for line in header_lines(echo, timestamp=timestamp):
            handle.write(line + "\n")
        handle.write(text.rstrip("\n") + "\n")

    path = _atomic(path, body)
    logger.info("wrote %s", path)
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")
