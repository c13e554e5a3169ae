"""ISO-8601 week keys, the joining key used throughout the pipeline.

Weeks are Monday-based and rendered as ``YYYY-Www`` (zero padded), so
lexicographic order equals chronological order for all years of interest.
"""

from __future__ import annotations

import datetime as dt
import re

_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")


def iso_week_key(day: dt.date) -> str:
    """Week key of the ISO week containing ``day``."""
    year, week, _ = day.isocalendar()
    return f"{year:04d}-W{week:02d}"


def week_monday(key: str) -> dt.date:
    """Monday of the week named by ``key`` (inverse of :func:`iso_week_key`)."""
    m = _WEEK_RE.match(key)
    if not m:
        raise ValueError(f"not an ISO week key: {key!r}")
    return dt.date.fromisocalendar(int(m.group(1)), int(m.group(2)), 1)


def week_index(key: str, origin: str) -> int:
    """Number of whole weeks from ``origin`` to ``key`` (0 when equal)."""
    return (week_monday(key) - week_monday(origin)).days // 7
