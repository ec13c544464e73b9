from datetime import timedelta

import pytest

from contextfuse.timeutil import TimeInterval, centered_interval, format_ts, parse_ts


def test_parse_format_roundtrip():
    text = "05-08 22:02:19"
    assert format_ts(parse_ts(text)) == text


def test_parse_orders_across_months():
    assert parse_ts("05-08 22:02:19") < parse_ts("06-06 21:51:22")


def test_interval_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        TimeInterval(parse_ts("05-02 00:00:00"), parse_ts("05-01 00:00:00"))


def test_interval_contains_is_inclusive():
    iv = TimeInterval(parse_ts("05-01 10:00:00"), parse_ts("05-01 11:00:00"))
    assert iv.contains(parse_ts("05-01 10:00:00"))
    assert iv.contains(parse_ts("05-01 11:00:00"))
    assert not iv.contains(parse_ts("05-01 11:00:01"))


def test_overlap_and_intersection():
    a = TimeInterval(parse_ts("05-01 10:00:00"), parse_ts("05-01 11:00:00"))
    b = TimeInterval(parse_ts("05-01 10:30:00"), parse_ts("05-01 12:00:00"))
    c = TimeInterval(parse_ts("05-01 11:00:00"), parse_ts("05-01 12:00:00"))
    d = TimeInterval(parse_ts("05-02 00:00:00"), parse_ts("05-02 01:00:00"))
    assert a.overlaps(b) and b.overlaps(a)
    assert a.overlaps(c)  # shared endpoint counts
    assert not a.overlaps(d)
    inter = a.intersection(b)
    assert inter.to_json() == ["05-01 10:30:00", "05-01 11:00:00"]
    assert a.intersection(c).duration == timedelta(0)
    assert a.intersection(d) is None


def test_centered_interval_matches_week_one_spacing():
    # a battery at 12:00 with 30-minute spacing spans [11:45, 12:15]
    iv = centered_interval(parse_ts("05-10 12:00:00"), timedelta(minutes=30))
    assert iv.to_json() == ["05-10 11:45:00", "05-10 12:15:00"]


def test_clipped_to_bounds():
    period = TimeInterval(parse_ts("05-01 00:00:00"), parse_ts("05-29 00:00:00"))
    iv = centered_interval(parse_ts("05-01 00:10:00"), timedelta(minutes=60))
    clipped = iv.clipped_to(period)
    assert clipped.start == period.start
    assert clipped.end == iv.end


def test_json_roundtrip():
    iv = TimeInterval(parse_ts("05-01 10:00:00"), parse_ts("05-01 11:00:00"))
    assert TimeInterval.from_json(iv.to_json()) == iv
