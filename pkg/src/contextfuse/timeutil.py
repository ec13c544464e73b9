"""Year-less timestamps and closed time intervals.

All timestamps in the data formats carry the form "mm-dd hh:mm:ss" with the
year removed. Internally they are anchored to a fixed non-leap year so that
interval arithmetic works; the anchor never leaks into serialized output.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

ANCHOR_YEAR = 2001  # non-leap; 2001-01-01 is a Monday
TS_FORMAT = "%m-%d %H:%M:%S"


def parse_ts(text: str) -> datetime:
    """Parse a "mm-dd hh:mm:ss" timestamp onto the anchor year."""
    parsed = datetime.strptime(text.strip(), TS_FORMAT)
    return parsed.replace(year=ANCHOR_YEAR)


def format_ts(t: datetime) -> str:
    return t.strftime(TS_FORMAT)


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Closed interval [start, end] with start <= end."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} after end {self.end}")

    @property
    def duration(self) -> timedelta:
        return self.end - self.start

    @property
    def center(self) -> datetime:
        return self.start + (self.end - self.start) / 2

    def contains(self, t: datetime) -> bool:
        return self.start <= t <= self.end

    def contains_interval(self, other: "TimeInterval") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: "TimeInterval") -> bool:
        """Closed-interval overlap; a shared endpoint counts."""
        return self.start <= other.end and other.start <= self.end

    def intersection(self, other: "TimeInterval") -> "TimeInterval | None":
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        if lo > hi:
            return None
        return TimeInterval(lo, hi)

    def clipped_to(self, bounds: "TimeInterval") -> "TimeInterval":
        inter = self.intersection(bounds)
        if inter is None:
            raise ValueError(f"interval {self} disjoint from bounds {bounds}")
        return inter

    def to_json(self) -> list[str]:
        return [format_ts(self.start), format_ts(self.end)]

    @classmethod
    def from_json(cls, pair: list[str]) -> "TimeInterval":
        return cls(parse_ts(pair[0]), parse_ts(pair[1]))

    def __str__(self) -> str:
        return f"[{format_ts(self.start)} .. {format_ts(self.end)}]"


def centered_interval(center: datetime, width: timedelta) -> TimeInterval:
    """Interval of the given width centered on a timestamp."""
    half = width / 2
    return TimeInterval(center - half, center + half)
