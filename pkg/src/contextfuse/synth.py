"""Deterministic synthetic dataset generator with planted ground truth.

Produces place records, diary batteries, and GPS traces in the exact CSV
formats the ingestion modules consume, plus a ground-truth file naming the
planted visits and co-locations. Every output is a pure function of the
spec's seed. A self-check replays each plant through the windowed
clustering pipeline before the data is handed out.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .geo import BoundingBox, GeoPoint, M_PER_DEG_LAT, PointGeom, geo_distance
from .personal import GpsSample, QuestionBattery, estimate_position
from .reference import PlaceRecord
from .timeutil import TimeInterval, format_ts, parse_ts
from .vocab import RESIDENCE_TYPES, WHAT_ANSWERS, WHERE_ANSWERS, WITHWHOM_ANSWERS

logger = logging.getLogger(__name__)


class SynthError(ValueError):
    """Impossible or inconsistent generation request."""


FCLASSES = ("building", "restaurant", "supermarket", "bank")
FCLASS_WEIGHTS = (0.35, 0.25, 0.2, 0.2)
BUILDING_TYPES = ("apartments", "house", "residential", "church", "office")

# diary answer that points at a place of the given class
FCLASS_TO_WHERE = {
    "building": "Home",
    "restaurant": "Restaurant",
    "supermarket": "Shop, supermarket",
    "bank": "Bank, post office",
}

STATIONARY_HALF_MINUTES = 6  # plants pin the walk for +/- this many minutes
COLOCATION_OFFSET_M = 5.0


@dataclass(frozen=True)
class PlantedVisit:
    userid: int
    place_index: int
    timestamp: datetime
    jitter_m: float = 8.0


@dataclass(frozen=True)
class PlantedColocation:
    userid_a: int
    userid_b: int
    timestamp: datetime


@dataclass
class SynthSpec:
    seed: int = 7
    n_places: int = 100
    n_participants: int = 5
    bbox: BoundingBox = field(default_factory=lambda: BoundingBox(45.95, 46.15, 10.95, 11.25))
    weeks: int = 4
    spacing_minutes_per_week: tuple[int, ...] = (30, 30, 60, 60)
    period_start: datetime = field(default_factory=lambda: parse_ts("05-08 22:00:00"))
    visits: tuple[PlantedVisit, ...] = ()
    colocations: tuple[PlantedColocation, ...] = ()
    auto_visits: int = 0
    auto_colocations: int = 0
    auto_visit_jitter_m: float = 8.0
    unanswered_rate: float = 0.1
    gps_noise_m: float = 6.0
    walk_step_m: float = 5.0
    min_place_separation_m: float = 120.0

    @property
    def period(self) -> TimeInterval:
        return TimeInterval(self.period_start, self.period_start + timedelta(weeks=self.weeks))

    def slot_times(self) -> list[datetime]:
        """Battery timestamps: the per-week question spacing laid over the
        observation period."""
        slots = []
        t = self.period_start
        end = self.period.end
        while t < end:
            slots.append(t)
            week = min(
                int((t - self.period_start).total_seconds() // (7 * 24 * 3600)),
                len(self.spacing_minutes_per_week) - 1,
            )
            t = t + timedelta(minutes=self.spacing_minutes_per_week[week])
        return slots

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_places": self.n_places,
            "n_participants": self.n_participants,
            "bbox": self.bbox.to_json(),
            "weeks": self.weeks,
            "spacing_minutes_per_week": list(self.spacing_minutes_per_week),
            "period_start": format_ts(self.period_start),
            "visits": [
                {
                    "userid": v.userid,
                    "place_index": v.place_index,
                    "timestamp": format_ts(v.timestamp),
                    "jitter_m": v.jitter_m,
                }
                for v in self.visits
            ],
            "colocations": [
                {"userid_a": c.userid_a, "userid_b": c.userid_b, "timestamp": format_ts(c.timestamp)}
                for c in self.colocations
            ],
            "auto_visits": self.auto_visits,
            "auto_colocations": self.auto_colocations,
            "auto_visit_jitter_m": self.auto_visit_jitter_m,
            "unanswered_rate": self.unanswered_rate,
            "gps_noise_m": self.gps_noise_m,
            "walk_step_m": self.walk_step_m,
            "min_place_separation_m": self.min_place_separation_m,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SynthSpec":
        spec = cls(
            seed=d.get("seed", 7),
            n_places=d.get("n_places", 100),
            n_participants=d.get("n_participants", 5),
            bbox=BoundingBox.from_json(d["bbox"]) if "bbox" in d else BoundingBox(45.95, 46.15, 10.95, 11.25),
            weeks=d.get("weeks", 4),
            spacing_minutes_per_week=tuple(d.get("spacing_minutes_per_week", (30, 30, 60, 60))),
            period_start=parse_ts(d["period_start"]) if "period_start" in d else parse_ts("05-08 22:00:00"),
            visits=tuple(
                PlantedVisit(
                    v["userid"], v["place_index"], parse_ts(v["timestamp"]), v.get("jitter_m", 8.0)
                )
                for v in d.get("visits", [])
            ),
            colocations=tuple(
                PlantedColocation(c["userid_a"], c["userid_b"], parse_ts(c["timestamp"]))
                for c in d.get("colocations", [])
            ),
            auto_visits=d.get("auto_visits", 0),
            auto_colocations=d.get("auto_colocations", 0),
            auto_visit_jitter_m=d.get("auto_visit_jitter_m", 8.0),
            unanswered_rate=d.get("unanswered_rate", 0.1),
            gps_noise_m=d.get("gps_noise_m", 6.0),
            walk_step_m=d.get("walk_step_m", 5.0),
            min_place_separation_m=d.get("min_place_separation_m", 120.0),
        )
        return spec


@dataclass(frozen=True)
class ExpectedVisit:
    userid: int
    timestamp: datetime
    place_id: str
    jitter_m: float


@dataclass(frozen=True)
class ExpectedColocation:
    userid_a: int
    userid_b: int
    timestamp: datetime


@dataclass
class GroundTruth:
    visits: list[ExpectedVisit] = field(default_factory=list)
    colocations: list[ExpectedColocation] = field(default_factory=list)
    residences: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "visits": [
                {
                    "userid": v.userid,
                    "timestamp": format_ts(v.timestamp),
                    "place_id": v.place_id,
                    "jitter_m": v.jitter_m,
                }
                for v in self.visits
            ],
            "colocations": [
                {"userid_a": c.userid_a, "userid_b": c.userid_b, "timestamp": format_ts(c.timestamp)}
                for c in self.colocations
            ],
            "residences": dict(sorted(self.residences.items())),
        }

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        return cls(
            visits=[
                ExpectedVisit(v["userid"], parse_ts(v["timestamp"]), v["place_id"], v["jitter_m"])
                for v in d.get("visits", [])
            ],
            colocations=[
                ExpectedColocation(c["userid_a"], c["userid_b"], parse_ts(c["timestamp"]))
                for c in d.get("colocations", [])
            ],
            residences=dict(d.get("residences", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        return cls.from_json(json.loads(Path(path).read_text()))


def _meters_to_deg(bbox: BoundingBox) -> tuple[float, float]:
    cos_mid = max(abs(math.cos(math.radians(bbox.center.lat))), 0.01)
    return 1.0 / M_PER_DEG_LAT, 1.0 / (M_PER_DEG_LAT * cos_mid)


def gen_places(spec: SynthSpec) -> tuple[list[PlaceRecord], dict[str, bool]]:
    """Uniform places inside the bbox honoring the minimum separation.

    Returns the records plus per-place residence labels (building type in
    the residence set). Deterministic for a given seed.
    """
    rng = random.Random(spec.seed)
    deg_lat, deg_lon = _meters_to_deg(spec.bbox)
    sep = spec.min_place_separation_m
    cell_lat = max(sep * deg_lat, 1e-9)
    cell_lon = max(sep * deg_lon, 1e-9)
    occupied: dict[tuple[int, int], list[GeoPoint]] = {}
    places: list[PlaceRecord] = []
    residences: dict[str, bool] = {}
    for i in range(spec.n_places):
        point = None
        for _ in range(2000):
            candidate = GeoPoint(
                rng.uniform(spec.bbox.min_lat, spec.bbox.max_lat),
                rng.uniform(spec.bbox.min_lon, spec.bbox.max_lon),
            )
            row = int((candidate.lat - spec.bbox.min_lat) / cell_lat)
            col = int((candidate.lon - spec.bbox.min_lon) / cell_lon)
            crowded = False
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    for neighbor in occupied.get((row + dr, col + dc), ()):
                        if geo_distance(candidate, neighbor) < sep:
                            crowded = True
                            break
                    if crowded:
                        break
                if crowded:
                    break
            if not crowded:
                occupied.setdefault((row, col), []).append(candidate)
                point = candidate
                break
        if point is None:
            raise SynthError(
                f"could not place {spec.n_places} places with {sep} m separation in the bbox"
            )
        fclass = rng.choices(FCLASSES, FCLASS_WEIGHTS)[0]
        place_type = rng.choice(BUILDING_TYPES) if fclass == "building" else None
        place_id = f"p{i:05d}"
        places.append(
            PlaceRecord(
                id=place_id,
                name=f"{fclass}-{i:04d}",
                fclass=fclass,
                type=place_type,
                geometry=PointGeom(point),
            )
        )
        residences[place_id] = place_type in RESIDENCE_TYPES
    return places, residences


def _disk_offset(rng: random.Random, radius_m: float) -> tuple[float, float]:
    r = radius_m * math.sqrt(rng.random())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return r * math.cos(theta), r * math.sin(theta)


def _snap_to_slot(t: datetime, slots: list[datetime]) -> int:
    best = min(range(len(slots)), key=lambda i: (abs((slots[i] - t).total_seconds()), i))
    return best


def _auto_plants(
    spec: SynthSpec, slots: list[datetime]
) -> tuple[list[PlantedVisit], list[PlantedColocation]]:
    rng = random.Random(spec.seed + 101)
    taken: set[tuple[int, int]] = set()
    visits: list[PlantedVisit] = []
    lo, hi = 4, max(len(slots) - 4, 5)
    for _ in range(spec.auto_visits):
        for _ in range(1000):
            userid = rng.randrange(spec.n_participants)
            slot = rng.randrange(lo, hi)
            if (userid, slot) not in taken:
                taken.add((userid, slot))
                visits.append(
                    PlantedVisit(
                        userid=userid,
                        place_index=rng.randrange(spec.n_places),
                        timestamp=slots[slot],
                        jitter_m=spec.auto_visit_jitter_m,
                    )
                )
                break
        else:
            raise SynthError("could not schedule the requested planted visits")
    colocations: list[PlantedColocation] = []
    for _ in range(spec.auto_colocations):
        for _ in range(1000):
            a = rng.randrange(spec.n_participants)
            b = rng.randrange(spec.n_participants)
            if a == b:
                continue
            slot = rng.randrange(lo, hi)
            if (a, slot) in taken or (b, slot) in taken:
                continue
            taken.add((a, slot))
            taken.add((b, slot))
            colocations.append(PlantedColocation(min(a, b), max(a, b), slots[slot]))
            break
        else:
            raise SynthError("could not schedule the requested planted co-locations")
    return visits, colocations


def gen_participants(
    spec: SynthSpec, places: list[PlaceRecord]
) -> tuple[list[QuestionBattery], list[GpsSample], GroundTruth]:
    """Random-walk GPS at one sample per minute plus diary batteries on the
    question grid, with plants pinning the walk near their targets.

    Visit batteries always carry the diary answer matching the planted
    place's class, so the plant is recoverable end-to-end.
    """
    period = spec.period
    slots = spec.slot_times()
    deg_lat, deg_lon = _meters_to_deg(spec.bbox)

    visits = list(spec.visits)
    colocations = list(spec.colocations)
    auto_visits, auto_colocs = _auto_plants(spec, slots)
    visits += auto_visits
    colocations += auto_colocs

    truth = GroundTruth()
    master = random.Random(spec.seed + 1)
    # per-user slot plans: slot index -> (anchor point, where answer or None)
    plans: dict[int, dict[int, tuple[GeoPoint, str | None, float]]] = {
        u: {} for u in range(spec.n_participants)
    }
    for v in visits:
        if not 0 <= v.userid < spec.n_participants:
            raise SynthError(f"planted visit names unknown userid {v.userid}")
        if not 0 <= v.place_index < len(places):
            raise SynthError(f"planted visit names unknown place index {v.place_index}")
        if not period.contains(v.timestamp):
            raise SynthError(f"planted visit at {format_ts(v.timestamp)} outside the period")
        slot = _snap_to_slot(v.timestamp, slots)
        if slot in plans[v.userid]:
            raise SynthError(f"user {v.userid} has two plants in slot {slot}")
        place = places[v.place_index]
        plans[v.userid][slot] = (
            place.geometry.centroid(),
            FCLASS_TO_WHERE.get(place.fclass, "Other place"),
            v.jitter_m,
        )
        truth.visits.append(ExpectedVisit(v.userid, slots[slot], place.id, v.jitter_m))
    for c in colocations:
        for userid in (c.userid_a, c.userid_b):
            if not 0 <= userid < spec.n_participants:
                raise SynthError(f"planted co-location names unknown userid {userid}")
        if not period.contains(c.timestamp):
            raise SynthError(f"planted co-location at {format_ts(c.timestamp)} outside the period")
        slot = _snap_to_slot(c.timestamp, slots)
        anchor = GeoPoint(
            master.uniform(spec.bbox.min_lat, spec.bbox.max_lat),
            master.uniform(spec.bbox.min_lon, spec.bbox.max_lon),
        )
        for userid in (c.userid_a, c.userid_b):
            if slot in plans[userid]:
                raise SynthError(f"user {userid} has two plants in slot {slot}")
            plans[userid][slot] = (anchor, None, COLOCATION_OFFSET_M)
        truth.colocations.append(
            ExpectedColocation(min(c.userid_a, c.userid_b), max(c.userid_a, c.userid_b), slots[slot])
        )

    total_minutes = int(period.duration.total_seconds() // 60)
    slot_tick = {i: int((t - period.start).total_seconds() // 60) for i, t in enumerate(slots)}
    batteries: list[QuestionBattery] = []
    samples: list[GpsSample] = []
    for userid in range(spec.n_participants):
        rng = random.Random(spec.seed * 1_000_003 + userid + 17)
        # stationary windows from this user's plants, keyed by tick
        pinned: dict[int, GeoPoint] = {}
        for slot, (anchor, _, jitter) in sorted(plans[userid].items()):
            dx, dy = _disk_offset(rng, jitter)
            point = GeoPoint(
                min(max(anchor.lat + dy * deg_lat, spec.bbox.min_lat), spec.bbox.max_lat),
                min(max(anchor.lon + dx * deg_lon, spec.bbox.min_lon), spec.bbox.max_lon),
            )
            center = slot_tick[slot]
            for tick in range(center - STATIONARY_HALF_MINUTES, center + STATIONARY_HALF_MINUTES + 1):
                if 0 <= tick < total_minutes:
                    pinned[tick] = point
        lat = rng.uniform(spec.bbox.min_lat, spec.bbox.max_lat)
        lon = rng.uniform(spec.bbox.min_lon, spec.bbox.max_lon)
        for tick in range(total_minutes):
            pin = pinned.get(tick)
            if pin is not None:
                lat, lon = pin.lat, pin.lon
            else:
                lat += rng.gauss(0.0, spec.walk_step_m) * deg_lat
                lon += rng.gauss(0.0, spec.walk_step_m) * deg_lon
                lat = min(max(lat, spec.bbox.min_lat), spec.bbox.max_lat)
                lon = min(max(lon, spec.bbox.min_lon), spec.bbox.max_lon)
            samples.append(
                GpsSample(
                    userid=userid,
                    timestamp=period.start + timedelta(minutes=tick),
                    point=GeoPoint(
                        min(max(lat + rng.gauss(0.0, spec.gps_noise_m) * deg_lat, -90.0), 90.0),
                        min(max(lon + rng.gauss(0.0, spec.gps_noise_m) * deg_lon, -180.0), 180.0),
                        200.0 + rng.gauss(0.0, 5.0),
                    ),
                )
            )
        for slot, t in enumerate(slots):
            plan = plans[userid].get(slot)
            if plan is None and rng.random() < spec.unanswered_rate:
                batteries.append(QuestionBattery(userid=userid, timestamp=t))
                continue
            if plan is not None and plan[1] is not None:
                where = plan[1]
            else:
                where = rng.choice(WHERE_ANSWERS) if rng.random() >= 0.15 else None
            what = rng.choice(WHAT_ANSWERS) if rng.random() >= 0.1 else None
            with_whom = rng.choice(WITHWHOM_ANSWERS) if rng.random() >= 0.1 else None
            mood = rng.randint(1, 5) if rng.random() >= 0.05 else None
            if plan is not None and what is None:
                what = "Other"  # planted batteries always count as answered
            batteries.append(
                QuestionBattery(
                    userid=userid,
                    timestamp=t,
                    where=where,
                    what=what,
                    with_whom=with_whom,
                    mood=mood,
                )
            )
    truth.residences = {}
    return batteries, samples, truth


def verify_plants(
    spec: SynthSpec,
    places: list[PlaceRecord],
    batteries: list[QuestionBattery],
    samples: list[GpsSample],
    truth: GroundTruth,
) -> None:
    """Replay every plant through the windowed clustering pipeline.

    Each planted visit must estimate within twice its jitter of the target
    place, with that place the nearest of all; each co-location must put
    both users within the default co-identity distance. Raises on failure.
    """
    by_user: dict[int, list[GpsSample]] = {}
    for s in samples:
        by_user.setdefault(s.userid, []).append(s)
    place_by_id = {p.id: p for p in places}
    battery_index = {(b.userid, b.timestamp): b for b in batteries}
    for v in truth.visits:
        estimate = estimate_position(by_user.get(v.userid, []), v.timestamp)
        if estimate is None:
            raise SynthError(f"planted visit for user {v.userid} yields no position estimate")
        target = place_by_id[v.place_id].geometry.centroid()
        gap = geo_distance(estimate, target)
        if gap > 2 * v.jitter_m:
            raise SynthError(
                f"planted visit for user {v.userid} estimates {gap:.1f} m from the target"
            )
        nearest = min(places, key=lambda p: (geo_distance(estimate, p.geometry.centroid()), p.id))
        if nearest.id != v.place_id:
            raise SynthError(
                f"planted visit for user {v.userid} is closer to {nearest.id} than {v.place_id}"
            )
        battery = battery_index.get((v.userid, v.timestamp))
        if battery is None or battery.where is None:
            raise SynthError(f"planted visit for user {v.userid} has no answered battery")
    for c in truth.colocations:
        a = estimate_position(by_user.get(c.userid_a, []), c.timestamp)
        b = estimate_position(by_user.get(c.userid_b, []), c.timestamp)
        if a is None or b is None:
            raise SynthError(
                f"planted co-location ({c.userid_a}, {c.userid_b}) yields no position estimate"
            )
        if geo_distance(a, b) > 25.0:
            raise SynthError(
                f"planted co-location ({c.userid_a}, {c.userid_b}) estimates too far apart"
            )


@dataclass
class SynthDataset:
    spec: SynthSpec
    places: list[PlaceRecord]
    batteries: list[QuestionBattery]
    samples: list[GpsSample]
    truth: GroundTruth


def gen_dataset(spec: SynthSpec, verify: bool = True) -> SynthDataset:
    places, residences = gen_places(spec)
    batteries, samples, truth = gen_participants(spec, places)
    truth.residences = residences
    if verify:
        verify_plants(spec, places, batteries, samples, truth)
    return SynthDataset(spec=spec, places=places, batteries=batteries, samples=samples, truth=truth)


def write_dataset(dataset: SynthDataset, out_dir: str | Path) -> None:
    from .personal import write_batteries_csv, write_gps_csv
    from .reference import write_places_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_places_csv(dataset.places, out / "places.csv")
    write_batteries_csv(dataset.batteries, out / "batteries.csv")
    write_gps_csv(dataset.samples, out / "gps.csv")
    dataset.truth.save(out / "ground_truth.json")
