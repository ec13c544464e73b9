"""Personal-side ingestion: diary question batteries and GPS samples
become streams of timed contexts.

Each answered battery yields one timed context whose interval is the
question spacing for that week, centered on the battery timestamp. The
position is estimated from GPS samples in a window around the timestamp
via density clustering: largest cluster, mean coordinates.
"""

from __future__ import annotations

import csv
import json
import logging
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .geo import GeoPoint, M_PER_DEG_LAT, SpatialIndex, BoundingBox, geo_distance
from .graph import Provenance, Triple
from .timeutil import TimeInterval, centered_interval, format_ts, parse_ts
from .vocab import (
    ALONE_PREDICATE,
    MOOD_MAX,
    MOOD_MIN,
    WHERE_TO_ETYPE,
    WITHWHOM_TO_RELATION,
    VocabError,
    check_answer,
)

logger = logging.getLogger(__name__)

ACTION_PREDICATE = "Action"
MOOD_PREDICATE = "Mood"
WITHWHOM_PREDICATE = "WithWhom"
NEAR_PREDICATE = "Near"

DEFAULT_WINDOW_S = 600.0  # 10-minute window around the question time
DEFAULT_EPS_M = 30.0
DEFAULT_MIN_PTS = 3

DEFAULT_SPACING_MINUTES = (30, 30, 60, 60)  # per-week question spacing


@dataclass(frozen=True)
class Participant:
    userid: int

    def __post_init__(self) -> None:
        if self.userid < 0:
            raise ValueError(f"userid must be >= 0, got {self.userid}")

    @property
    def entity_id(self) -> str:
        return f"User{self.userid}"


@dataclass(frozen=True)
class QuestionBattery:
    userid: int
    timestamp: datetime
    where: str | None = None
    what: str | None = None
    with_whom: str | None = None
    mood: int | None = None

    def __post_init__(self) -> None:
        if self.mood is not None and not MOOD_MIN <= self.mood <= MOOD_MAX:
            raise ValueError(f"mood {self.mood} outside [{MOOD_MIN}, {MOOD_MAX}]")

    def is_blank(self) -> bool:
        return self.where is None and self.what is None and self.with_whom is None and self.mood is None


@dataclass(frozen=True, slots=True)
class GpsSample:
    userid: int
    timestamp: datetime
    point: GeoPoint


class AnonymousIds:
    """Per-stream counters for anonymous entity ids.

    The participant occupies the first person slot, so fresh person ids
    start at #Person2; every other etype starts at 1. Ids never repeat
    within a stream.
    """

    def __init__(self) -> None:
        self._next: dict[str, int] = {"Person": 2}

    def next(self, etype: str) -> str:
        k = self._next.get(etype, 1)
        self._next[etype] = k + 1
        return f"#{etype}{k}"


@dataclass
class TimedPersonalContext:
    userid: int
    interval: TimeInterval
    triples: list[Triple] = field(default_factory=list)
    anonymous_entities: dict[str, str] = field(default_factory=dict)  # id -> etype
    estimated_position: GeoPoint | None = None
    answers: dict[str, str | int | None] = field(default_factory=dict)

    @property
    def user_entity_id(self) -> str:
        return f"User{self.userid}"

    @property
    def anonymous_place(self) -> tuple[str, str] | None:
        """The where-derived anonymous place (id, etype), if any."""
        for anon_id, etype in self.anonymous_entities.items():
            if etype != "Person":
                return anon_id, etype
        return None

    def to_json_dict(self) -> dict:
        return {
            "userid": self.userid,
            "interval": self.interval.to_json(),
            "position": (
                [self.estimated_position.lat, self.estimated_position.lon, self.estimated_position.alt]
                if self.estimated_position
                else None
            ),
            "triples": [t.to_json_dict() for t in self.triples],
            "anonymous_entities": self.anonymous_entities,
            "answers": self.answers,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TimedPersonalContext":
        pos = d.get("position")
        return cls(
            userid=d["userid"],
            interval=TimeInterval.from_json(d["interval"]),
            triples=[Triple.from_json_dict(t) for t in d.get("triples", [])],
            anonymous_entities=dict(d.get("anonymous_entities", {})),
            estimated_position=GeoPoint(pos[0], pos[1], pos[2]) if pos else None,
            answers=dict(d.get("answers", {})),
        )


@dataclass
class PersonalStream:
    userid: int
    period: TimeInterval
    contexts: list[TimedPersonalContext] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.contexts)


def _region_query_builder(points: list[GeoPoint], eps_m: float):
    """Neighbor lookup under geo_distance; grid-backed beyond small inputs.

    Returns a function idx -> sorted list of neighbor indices (self
    included) within eps.
    """
    n = len(points)
    if n <= 64:
        def brute(i: int) -> list[int]:
            p = points[i]
            return [j for j in range(n) if geo_distance(p, points[j]) <= eps_m]

        return brute

    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    pad = eps_m / M_PER_DEG_LAT + 1e-6
    bbox = BoundingBox(
        max(min(lats) - pad, -90.0),
        min(max(lats) + pad, 90.0),
        max(min(lons) - pad * 4, -180.0),
        min(max(lons) + pad * 4, 180.0),
    )
    index = SpatialIndex.build(list(enumerate(points)), bbox, cell_size_m=max(eps_m, 1.0))

    def gridded(i: int) -> list[int]:
        return sorted(j for j, _ in index.query_within(points[i], eps_m))

    return gridded


def dbscan(points: list[GeoPoint], eps_m: float, min_pts: int) -> tuple[list[list[int]], list[int]]:
    """Density clustering under great-circle distance.

    Returns (clusters, noise) as lists of point indices. Scanning and
    expansion follow input order, so the partition is deterministic for a
    given input sequence. A point's eps-neighborhood includes itself.
    """
    if eps_m <= 0:
        raise ValueError(f"eps must be positive, got {eps_m}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    n = len(points)
    region = _region_query_builder(points, eps_m)
    labels: list[int | None] = [None] * n  # None unvisited, -1 noise, >=0 cluster
    n_clusters = 0
    for i in range(n):
        if labels[i] is not None:
            continue
        neighbors = region(i)
        if len(neighbors) < min_pts:
            labels[i] = -1
            continue
        cluster_id = n_clusters
        n_clusters += 1
        labels[i] = cluster_id
        queue = deque(j for j in neighbors if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cluster_id  # border point rescued from noise
                continue
            if labels[j] is not None:
                continue
            labels[j] = cluster_id
            j_neighbors = region(j)
            if len(j_neighbors) >= min_pts:
                queue.extend(j_neighbors)
    clusters: list[list[int]] = [[] for _ in range(n_clusters)]
    noise: list[int] = []
    for i, label in enumerate(labels):
        if label == -1:
            noise.append(i)
        else:
            clusters[label].append(i)
    return clusters, noise


def estimate_position(
    samples: list[GpsSample],
    t_q: datetime,
    window_s: float = DEFAULT_WINDOW_S,
    eps_m: float = DEFAULT_EPS_M,
    min_pts: int = DEFAULT_MIN_PTS,
) -> GeoPoint | None:
    """Mean coordinates of the largest density cluster in the time window.

    Ties go to the cluster containing the sample closest to the question
    time. None when the window is empty or everything is noise.
    """
    if window_s <= 0:
        raise ValueError(f"window must be positive, got {window_s}")
    half = timedelta(seconds=window_s / 2)
    window = [s for s in samples if abs((s.timestamp - t_q).total_seconds()) <= half.total_seconds()]
    if not window:
        return None
    clusters, _ = dbscan([s.point for s in window], eps_m, min_pts)
    if not clusters:
        return None
    best_size = max(len(c) for c in clusters)
    tied = [c for c in clusters if len(c) == best_size]
    if len(tied) == 1:
        chosen = tied[0]
    else:
        def time_gap(cluster: list[int]) -> float:
            return min(abs((window[i].timestamp - t_q).total_seconds()) for i in cluster)

        chosen = min(tied, key=time_gap)
    members = [window[i].point for i in chosen]
    lat = sum(p.lat for p in members) / len(members)
    lon = sum(p.lon for p in members) / len(members)
    alts = [p.alt for p in members]
    alt = sum(alts) / len(alts) if all(a is not None for a in alts) else None
    return GeoPoint(lat, lon, alt)


def battery_to_context(
    battery: QuestionBattery,
    interval: TimeInterval,
    position: GeoPoint | None,
    counter: AnonymousIds,
) -> TimedPersonalContext:
    """Encode one battery's answers as triples around the participant.

    Activities become timed Action triples, mood a timed literal,
    companions and places fresh anonymous entities related to the
    participant. Missing answers produce nothing.
    """
    ctx = TimedPersonalContext(
        userid=battery.userid,
        interval=interval,
        estimated_position=position,
        answers={
            "where": battery.where,
            "what": battery.what,
            "withWhom": battery.with_whom,
            "mood": battery.mood,
        },
    )
    me = ctx.user_entity_id
    if battery.what is not None:
        check_answer("what", battery.what)
        ctx.triples.append(
            Triple(me, ACTION_PREDICATE, battery.what, validity=interval, provenance=Provenance.PERSONAL)
        )
    if battery.mood is not None:
        ctx.triples.append(
            Triple(me, MOOD_PREDICATE, battery.mood, validity=interval, provenance=Provenance.PERSONAL)
        )
    if battery.with_whom is not None:
        check_answer("withWhom", battery.with_whom)
        relation = WITHWHOM_TO_RELATION[battery.with_whom]
        if relation is None:
            ctx.triples.append(
                Triple(me, ALONE_PREDICATE, True, validity=interval, provenance=Provenance.PERSONAL)
            )
        else:
            person = counter.next("Person")
            ctx.anonymous_entities[person] = "Person"
            # the relation itself is a stable role, not a timed action
            ctx.triples.append(
                Triple(person, relation, me, provenance=Provenance.PERSONAL, object_is_entity=True)
            )
            ctx.triples.append(
                Triple(
                    me,
                    WITHWHOM_PREDICATE,
                    person,
                    validity=interval,
                    provenance=Provenance.PERSONAL,
                    object_is_entity=True,
                )
            )
            ctx.triples.append(
                Triple(
                    me,
                    NEAR_PREDICATE,
                    person,
                    validity=interval,
                    provenance=Provenance.PERSONAL,
                    object_is_entity=True,
                )
            )
    if battery.where is not None:
        check_answer("where", battery.where)
        etype = WHERE_TO_ETYPE[battery.where]
        place = counter.next(etype)
        ctx.anonymous_entities[place] = etype
        ctx.triples.append(
            Triple(
                me,
                NEAR_PREDICATE,
                place,
                validity=interval,
                provenance=Provenance.PERSONAL,
                object_is_entity=True,
            )
        )
    return ctx


def _week_index(t: datetime, period: TimeInterval, n_weeks: int) -> int:
    week = int((t - period.start).total_seconds() // (7 * 24 * 3600))
    return min(max(week, 0), n_weeks - 1)


def build_stream(
    participant: Participant,
    batteries: list[QuestionBattery],
    samples: list[GpsSample],
    schedule: tuple[int, ...] = DEFAULT_SPACING_MINUTES,
    period: TimeInterval | None = None,
    window_s: float = DEFAULT_WINDOW_S,
    eps_m: float = DEFAULT_EPS_M,
    min_pts: int = DEFAULT_MIN_PTS,
) -> PersonalStream:
    """One timed context per answered battery, in timestamp order.

    ``schedule`` gives the question spacing in minutes per week of the
    observation period; the context interval is that spacing centered on
    the battery timestamp, clipped to the period. Batteries outside the
    period and fully blank batteries are dropped.
    """
    if period is None:
        raise ValueError("build_stream requires the observation period")
    if not schedule:
        raise ValueError("schedule must name at least one week's spacing")
    own_batteries = sorted(
        (b for b in batteries if b.userid == participant.userid), key=lambda b: b.timestamp
    )
    own_samples = sorted(
        (s for s in samples if s.userid == participant.userid), key=lambda s: s.timestamp
    )
    sample_times = [s.timestamp for s in own_samples]
    half_window = timedelta(seconds=window_s / 2)
    counter = AnonymousIds()
    stream = PersonalStream(userid=participant.userid, period=period)
    last_center: datetime | None = None
    for battery in own_batteries:
        if battery.is_blank():
            continue
        if not period.contains(battery.timestamp):
            logger.warning(
                "battery for user %d at %s outside the observation period; dropped",
                battery.userid,
                format_ts(battery.timestamp),
            )
            continue
        if last_center is not None and battery.timestamp <= last_center:
            logger.warning(
                "battery for user %d at %s does not advance the stream; dropped",
                battery.userid,
                format_ts(battery.timestamp),
            )
            continue
        spacing = timedelta(minutes=schedule[_week_index(battery.timestamp, period, len(schedule))])
        interval = centered_interval(battery.timestamp, spacing).clipped_to(period)
        lo = bisect_left(sample_times, battery.timestamp - half_window)
        hi = bisect_right(sample_times, battery.timestamp + half_window)
        position = estimate_position(
            own_samples[lo:hi], battery.timestamp, window_s=window_s, eps_m=eps_m, min_pts=min_pts
        )
        stream.contexts.append(battery_to_context(battery, interval, position, counter))
        last_center = battery.timestamp
    return stream


def read_batteries_csv(path: str | Path) -> list[QuestionBattery]:
    batteries = []
    with open(path, newline="") as f:
        for i, row in enumerate(csv.DictReader(f)):
            try:
                mood = row.get("mood", "")
                batteries.append(
                    QuestionBattery(
                        userid=int(row["userid"]),
                        timestamp=parse_ts(row["timestamp"]),
                        where=row.get("where") or None,
                        what=row.get("what") or None,
                        with_whom=row.get("withWhom") or None,
                        mood=int(mood) if mood else None,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise VocabError(f"bad battery row {i + 1} in {path}: {exc}") from exc
    return batteries


def write_batteries_csv(batteries: list[QuestionBattery], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["userid", "timestamp", "where", "what", "withWhom", "mood"])
        for b in batteries:
            writer.writerow(
                [
                    b.userid,
                    format_ts(b.timestamp),
                    b.where or "",
                    b.what or "",
                    b.with_whom or "",
                    b.mood if b.mood is not None else "",
                ]
            )


def read_gps_csv(path: str | Path) -> list[GpsSample]:
    samples = []
    with open(path, newline="") as f:
        for i, row in enumerate(csv.DictReader(f)):
            try:
                alt = row.get("alt", "")
                samples.append(
                    GpsSample(
                        userid=int(row["userid"]),
                        timestamp=parse_ts(row["timestamp"]),
                        point=GeoPoint(float(row["lat"]), float(row["lon"]), float(alt) if alt else None),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise VocabError(f"bad GPS row {i + 1} in {path}: {exc}") from exc
    return samples


def write_gps_csv(samples: list[GpsSample], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["userid", "timestamp", "lat", "lon", "alt"])
        for s in samples:
            writer.writerow(
                [
                    s.userid,
                    format_ts(s.timestamp),
                    f"{s.point.lat:.7f}",
                    f"{s.point.lon:.7f}",
                    f"{s.point.alt:.2f}" if s.point.alt is not None else "",
                ]
            )


def write_streams(streams: list[PersonalStream], out_dir: str | Path) -> dict[str, int]:
    """Per-user context files plus a manifest; returns bytes per file."""
    from .graph import dumps_canonical

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes: dict[str, int] = {}
    manifest = {"users": [], "period": None}
    for stream in streams:
        name = f"user_{stream.userid:04d}.jsonl"
        lines = [dumps_canonical(c.to_json_dict()) for c in stream.contexts]
        data = "\n".join(lines) + ("\n" if lines else "")
        (out / name).write_text(data)
        sizes[name] = len(data.encode())
        manifest["users"].append(stream.userid)
        manifest["period"] = stream.period.to_json()
    manifest_text = dumps_canonical(manifest) + "\n"
    (out / "manifest.json").write_text(manifest_text)
    sizes["manifest.json"] = len(manifest_text.encode())
    return sizes


def read_streams(in_dir: str | Path) -> list[PersonalStream]:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    if not manifest["users"]:
        return []
    period = TimeInterval.from_json(manifest["period"])
    streams = []
    for userid in manifest["users"]:
        contexts = []
        for line in (src / f"user_{userid:04d}.jsonl").read_text().splitlines():
            if line.strip():
                contexts.append(TimedPersonalContext.from_json_dict(json.loads(line)))
        streams.append(PersonalStream(userid=userid, period=period, contexts=contexts))
    return streams
