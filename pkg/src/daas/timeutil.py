"""UTC timestamp helpers. Internally times are POSIX seconds (float)."""
from __future__ import annotations

from datetime import datetime, timezone

HOUR_S = 3600


def parse_ts(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    if isinstance(text, datetime):
        dt = text
    else:
        s = str(text).strip()
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s.replace(" ", "T"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_ts(seconds: float) -> str:
    """ISO-8601 UTC with whole seconds, e.g. ``2017-11-01T01:02:45Z``."""
    return datetime.fromtimestamp(round(seconds), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def epoch_hour(seconds: float) -> int:
    return int(seconds // HOUR_S)


def to_datetime(seconds: float) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)
