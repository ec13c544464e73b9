"""Geometry primitives, great-circle distance, containment tests, and a
uniform grid index for radius queries over place coordinates.

Distances use the haversine formula on a sphere of radius 6,371,000 m.
Containment (polygon and bounding box) treats boundary points as inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0
# meters per degree of latitude on the reference sphere
M_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0


class GeometryError(ValueError):
    """Malformed or degenerate geometry."""


class SpatialIndexError(ValueError):
    """Point outside the declared index bounds."""


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float
    alt: float | None = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise GeometryError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise GeometryError(f"longitude {self.lon} outside [-180, 180]")
        if self.alt is not None and not math.isfinite(self.alt):
            raise GeometryError(f"altitude {self.alt} not finite")


def geo_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters (haversine)."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    d_phi = math.radians(b.lat - a.lat)
    d_lambda = math.radians(b.lon - a.lon)
    h = math.sin(d_phi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(d_lambda / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _mean_point(points: tuple[GeoPoint, ...]) -> GeoPoint:
    lat = sum(p.lat for p in points) / len(points)
    lon = sum(p.lon for p in points) / len(points)
    alts = [p.alt for p in points]
    alt = sum(alts) / len(alts) if all(a is not None for a in alts) else None
    return GeoPoint(lat, lon, alt)


@dataclass(frozen=True)
class PointGeom:
    point: GeoPoint

    def centroid(self) -> GeoPoint:
        return self.point


@dataclass(frozen=True)
class Polyline:
    points: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise GeometryError("polyline needs at least 2 points")
        if len(set((p.lat, p.lon) for p in self.points)) < 2:
            raise GeometryError("polyline needs at least 2 distinct points")

    def centroid(self) -> GeoPoint:
        return _mean_point(self.points)


@dataclass(frozen=True)
class Polygon:
    """Closed ring: first vertex repeated as last, >= 3 distinct vertices."""

    ring: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ring", tuple(self.ring))
        if len(self.ring) < 4:
            raise GeometryError("polygon ring needs >= 3 vertices plus the closing point")
        first, last = self.ring[0], self.ring[-1]
        if (first.lat, first.lon) != (last.lat, last.lon):
            raise GeometryError("polygon ring is not closed")
        if len(set((p.lat, p.lon) for p in self.vertices)) < 3:
            raise GeometryError("polygon needs >= 3 distinct vertices")

    @property
    def vertices(self) -> tuple[GeoPoint, ...]:
        return self.ring[:-1]

    def centroid(self) -> GeoPoint:
        return _mean_point(self.vertices)

    def signed_area_deg2(self) -> float:
        """Shoelace area in squared degrees on the lat/lon plane."""
        total = 0.0
        for a, b in zip(self.ring[:-1], self.ring[1:]):
            total += a.lon * b.lat - b.lon * a.lat
        return total / 2.0

    def bbox(self) -> "BoundingBox":
        lats = [p.lat for p in self.vertices]
        lons = [p.lon for p in self.vertices]
        return BoundingBox(min(lats), max(lats), min(lons), max(lons))


Geometry = PointGeom | Polyline | Polygon


@dataclass(frozen=True)
class BoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat:
            raise GeometryError(f"min_lat {self.min_lat} > max_lat {self.max_lat}")
        if self.min_lon > self.max_lon:
            raise GeometryError(f"min_lon {self.min_lon} > max_lon {self.max_lon}")
        for lat in (self.min_lat, self.max_lat):
            if not -90.0 <= lat <= 90.0:
                raise GeometryError(f"latitude {lat} outside [-90, 90]")
        for lon in (self.min_lon, self.max_lon):
            if not -180.0 <= lon <= 180.0:
                raise GeometryError(f"longitude {lon} outside [-180, 180]")

    def contains(self, p: GeoPoint) -> bool:
        """Inclusive on all four edges."""
        return self.min_lat <= p.lat <= self.max_lat and self.min_lon <= p.lon <= self.max_lon

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2, (self.min_lon + self.max_lon) / 2)

    def to_json(self) -> dict[str, float]:
        return {
            "min_lat": self.min_lat,
            "max_lat": self.max_lat,
            "min_lon": self.min_lon,
            "max_lon": self.max_lon,
        }

    @classmethod
    def from_json(cls, d: dict[str, float]) -> "BoundingBox":
        return cls(d["min_lat"], d["max_lat"], d["min_lon"], d["max_lon"])


def within_bbox(p: GeoPoint, b: BoundingBox) -> bool:
    return b.contains(p)


def _on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint, eps: float = 1e-12) -> bool:
    cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon)
    if abs(cross) > eps:
        return False
    if not (min(a.lon, b.lon) - eps <= p.lon <= max(a.lon, b.lon) + eps):
        return False
    return min(a.lat, b.lat) - eps <= p.lat <= max(a.lat, b.lat) + eps


def point_in_polygon(p: GeoPoint, poly: Polygon) -> bool:
    """Ray casting on the lat/lon plane; boundary points count as inside."""
    if abs(poly.signed_area_deg2()) < 1e-16:
        raise GeometryError("degenerate polygon with zero area")
    for a, b in zip(poly.ring[:-1], poly.ring[1:]):
        if _on_segment(p, a, b):
            return True
    inside = False
    x, y = p.lon, p.lat
    for a, b in zip(poly.ring[:-1], poly.ring[1:]):
        y1, y2 = a.lat, b.lat
        if (y1 <= y) != (y2 <= y):
            x_cross = a.lon + (y - y1) / (y2 - y1) * (b.lon - a.lon)
            if x < x_cross:
                inside = not inside
    return inside


class SpatialIndex:
    """Uniform lat/lon grid over a bounding box.

    Cell edges are sized from ``cell_size_m`` at the box's central latitude.
    Every indexed id lives in exactly one cell; radius queries scan the cell
    neighborhood covering the radius and filter candidates by exact
    ``geo_distance``, so results match a brute-force scan.
    """

    def __init__(self, bbox: BoundingBox, cell_size_m: float = 100.0):
        if cell_size_m <= 0:
            raise SpatialIndexError(f"cell size must be positive, got {cell_size_m}")
        self.bbox = bbox
        self.cell_size_m = cell_size_m
        self._dlat = cell_size_m / M_PER_DEG_LAT
        cos_mid = max(abs(math.cos(math.radians(bbox.center.lat))), 0.01)
        self._dlon = cell_size_m / (M_PER_DEG_LAT * cos_mid)
        lat_extent = bbox.max_lat - bbox.min_lat
        lon_extent = bbox.max_lon - bbox.min_lon
        self._rows = max(1, math.ceil(lat_extent / self._dlat))
        self._cols = max(1, math.ceil(lon_extent / self._dlon))
        self._cells: dict[tuple[int, int], list[tuple[str, GeoPoint]]] = {}
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def _row_of(self, lat: float) -> int:
        r = int((lat - self.bbox.min_lat) / self._dlat)
        return min(max(r, 0), self._rows - 1)

    def _col_of(self, lon: float) -> int:
        c = int((lon - self.bbox.min_lon) / self._dlon)
        return min(max(c, 0), self._cols - 1)

    def _insert(self, entity_id, point: GeoPoint) -> None:
        key = (self._row_of(point.lat), self._col_of(point.lon))
        self._cells.setdefault(key, []).append((entity_id, point))
        self._count += 1

    @classmethod
    def build(
        cls,
        entries,
        bbox: BoundingBox,
        cell_size_m: float = 100.0,
    ) -> "SpatialIndex":
        """Index (id, point) pairs; raises naming any id outside the bbox."""
        index = cls(bbox, cell_size_m)
        for entity_id, point in entries:
            if not bbox.contains(point):
                raise SpatialIndexError(f"point for id {entity_id!r} outside index bounds")
            index._insert(entity_id, point)
        return index

    def query_within(self, p: GeoPoint, radius_m: float):
        """All (id, distance) with distance <= radius, nearest first.

        Sorted ascending by distance, ties broken by ascending id.
        """
        if radius_m < 0:
            raise SpatialIndexError(f"radius must be >= 0, got {radius_m}")
        dlat_r = radius_m / M_PER_DEG_LAT + 1e-7
        band_lo = max(p.lat - dlat_r, -90.0)
        band_hi = min(p.lat + dlat_r, 90.0)
        # smallest cosine over the latitude band keeps the scan a superset
        cos_min = max(min(abs(math.cos(math.radians(band_lo))), abs(math.cos(math.radians(band_hi)))), 0.01)
        dlon_r = radius_m / (M_PER_DEG_LAT * cos_min) + 1e-7
        row_lo = self._row_of(p.lat - dlat_r)
        row_hi = self._row_of(p.lat + dlat_r)
        col_lo = self._col_of(max(p.lon - dlon_r, -180.0))
        col_hi = self._col_of(min(p.lon + dlon_r, 180.0))
        hits = []
        for row in range(row_lo, row_hi + 1):
            for col in range(col_lo, col_hi + 1):
                for entity_id, point in self._cells.get((row, col), ()):
                    d = geo_distance(p, point)
                    if d <= radius_m:
                        hits.append((d, entity_id))
        hits.sort()
        return [(entity_id, d) for d, entity_id in hits]


def geometry_to_wkt(geom: Geometry) -> str:
    # repr keeps the shortest exact representation, so WKT round-trips
    if isinstance(geom, PointGeom):
        return f"POINT ({geom.point.lon!r} {geom.point.lat!r})"
    if isinstance(geom, Polyline):
        coords = ", ".join(f"{p.lon!r} {p.lat!r}" for p in geom.points)
        return f"LINESTRING ({coords})"
    coords = ", ".join(f"{p.lon!r} {p.lat!r}" for p in geom.ring)
    return f"POLYGON (({coords}))"


def _parse_coord_list(body: str) -> list[GeoPoint]:
    points = []
    for pair in body.split(","):
        parts = pair.split()
        if len(parts) != 2:
            raise GeometryError(f"bad WKT coordinate pair: {pair!r}")
        lon, lat = float(parts[0]), float(parts[1])
        points.append(GeoPoint(lat, lon))
    return points


def wkt_to_geometry(text: str) -> Geometry:
    """Parse the three WKT forms used by the place files."""
    cleaned = text.strip()
    upper = cleaned.upper()
    if upper.startswith("POINT"):
        body = cleaned[cleaned.index("(") + 1 : cleaned.rindex(")")]
        (point,) = _parse_coord_list(body)
        return PointGeom(point)
    if upper.startswith("LINESTRING"):
        body = cleaned[cleaned.index("(") + 1 : cleaned.rindex(")")]
        return Polyline(tuple(_parse_coord_list(body)))
    if upper.startswith("POLYGON"):
        inner = cleaned[cleaned.index("(") + 1 : cleaned.rindex(")")].strip()
        body = inner[inner.index("(") + 1 : inner.rindex(")")]
        return Polygon(tuple(_parse_coord_list(body)))
    raise GeometryError(f"unsupported WKT geometry: {text[:40]!r}")
