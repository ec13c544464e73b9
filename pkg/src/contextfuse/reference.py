"""Reference-side ingestion: lift place records into a time-invariant
entity graph, then derive containment (PartIn) and proximity (Near)
triples.

Input formats: CSV with header (id,name,fclass,type,geometry_wkt) and a
GeoJSON FeatureCollection with properties id/name/fclass/type.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .geo import (
    BoundingBox,
    Geometry,
    GeoPoint,
    PointGeom,
    Polygon,
    Polyline,
    SpatialIndex,
    point_in_polygon,
    wkt_to_geometry,
)
from .graph import Box, Entity, EntityGraph, GraphError, Provenance, Triple
from .teleontology import Stage, Teleontology
from .timeutil import TimeInterval
from .vocab import DEFAULT_ETYPE, FCLASS_TO_ETYPE

logger = logging.getLogger(__name__)

PARTIN_PREDICATE = "PartIn"
NEAR_PREDICATE = "Near"

# place-to-place proximity threshold; the phone-to-place threshold is a
# unification parameter and defaults to 50 m
DEFAULT_PLACE_NEAR_M = 100.0


class IngestError(ValueError):
    """Invalid ingestion input."""


@dataclass(frozen=True)
class PlaceRecord:
    id: str
    fclass: str
    geometry: Geometry
    name: str | None = None
    type: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise IngestError("place record with empty id")


def ingest_reference(
    records: list[PlaceRecord],
    bbox: BoundingBox,
    period: TimeInterval,
    etg: Teleontology,
    fclass_map: dict[str, str] | None = None,
    location_label: str = "region",
) -> EntityGraph:
    """Lift place records into entities, dropping records outside the bbox.

    Unmappable place classes route to the default etype and are counted in
    ``graph.meta`` rather than failing the batch.
    """
    if etg.stage is not Stage.ETG:
        raise IngestError(f"reference schema must be an ETG, got {etg.stage.value}")
    if period.duration.total_seconds() <= 0:
        raise IngestError("observation period must be non-empty")
    mapping = FCLASS_TO_ETYPE if fclass_map is None else fclass_map
    graph = EntityGraph(Box(location_label, bbox, period), etg)
    seen: set[str] = set()
    dropped = 0
    unmapped = 0
    for record in records:
        if record.id in seen:
            raise IngestError(f"duplicate place id {record.id!r}")
        seen.add(record.id)
        position = record.geometry.centroid() if not isinstance(record.geometry, PointGeom) else record.geometry.point
        if not bbox.contains(position):
            dropped += 1
            continue
        etype = mapping.get(record.fclass.lower())
        if etype is None or etype not in etg.etypes:
            etype = DEFAULT_ETYPE
            unmapped += 1
        properties: dict = {}
        if record.type is not None:
            properties["type"] = record.type
        graph.add_entity(
            Entity(
                id=record.id,
                etype=etype,
                klass=record.fclass.lower(),
                name=record.name,
                geometries=(record.geometry,),
                properties=properties,
            )
        )
    graph.meta.update(
        {"ingested": len(graph.entities), "dropped_outside_bbox": dropped, "unmapped_fclass": unmapped}
    )
    if dropped:
        logger.info("dropped %d place records outside the bounding box", dropped)
    return graph


def _polygon_contains_entity(poly: Polygon, entity: Entity) -> bool:
    poly_bbox = poly.bbox()
    polygons = [g for g in entity.geometries if isinstance(g, Polygon)]
    if polygons:
        # nested region: every vertex of the inner rings must fall inside
        for inner in polygons:
            for vertex in inner.vertices:
                if not poly_bbox.contains(vertex) or not point_in_polygon(vertex, poly):
                    return False
        return True
    position = entity.position()
    if position is None:
        return False
    return poly_bbox.contains(position) and point_in_polygon(position, poly)


def compute_partin(graph: EntityGraph) -> EntityGraph:
    """Add PartIn triples: entity inside a polygon entity's region."""
    polygon_owners = [
        (entity, geom)
        for entity in graph.entities.values()
        for geom in entity.geometries
        if isinstance(geom, Polygon)
    ]
    added = 0
    for inner in graph.entities.values():
        for outer, poly in polygon_owners:
            if inner.id == outer.id:
                continue
            if _polygon_contains_entity(poly, inner):
                if graph.add_triple(
                    Triple(inner.id, PARTIN_PREDICATE, outer.id, provenance=Provenance.REFERENCE, object_is_entity=True)
                ):
                    added += 1
    graph.meta["partin_triples"] = graph.meta.get("partin_triples", 0) + added
    return graph


def compute_near(
    graph: EntityGraph,
    threshold_m: float = DEFAULT_PLACE_NEAR_M,
    cell_size_m: float | None = None,
) -> EntityGraph:
    """Add Near triples for distinct entity pairs within the threshold.

    The symmetric relation is stored once, lower id first.
    """
    if threshold_m <= 0:
        raise IngestError(f"near threshold must be positive, got {threshold_m}")
    positioned = [(e.id, e.position()) for e in graph.entities.values()]
    positioned = [(eid, p) for eid, p in positioned if p is not None]
    index = SpatialIndex.build(positioned, graph.box.region, cell_size_m or max(threshold_m, 50.0))
    added = 0
    for entity_id, position in positioned:
        for other_id, distance in index.query_within(position, threshold_m):
            if other_id <= entity_id:
                continue
            if graph.add_triple(
                Triple(
                    entity_id,
                    NEAR_PREDICATE,
                    other_id,
                    provenance=Provenance.REFERENCE,
                    object_is_entity=True,
                    distance_m=distance,
                )
            ):
                added += 1
    graph.meta["near_triples"] = graph.meta.get("near_triples", 0) + added
    return graph


def read_places_csv(path: str | Path) -> list[PlaceRecord]:
    records = []
    with open(path, newline="") as f:
        for i, row in enumerate(csv.DictReader(f)):
            try:
                records.append(
                    PlaceRecord(
                        id=row["id"],
                        name=row.get("name") or None,
                        fclass=row["fclass"],
                        type=row.get("type") or None,
                        geometry=wkt_to_geometry(row["geometry_wkt"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise IngestError(f"bad place row {i + 1} in {path}: {exc}") from exc
    return records


def write_places_csv(records: list[PlaceRecord], path: str | Path) -> None:
    from .geo import geometry_to_wkt

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "name", "fclass", "type", "geometry_wkt"])
        for r in records:
            writer.writerow([r.id, r.name or "", r.fclass, r.type or "", geometry_to_wkt(r.geometry)])


def _geojson_geometry(geom: dict) -> Geometry:
    kind = geom.get("type")
    coords = geom.get("coordinates")
    if kind == "Point":
        lon, lat = coords[0], coords[1]
        return PointGeom(GeoPoint(lat, lon))
    if kind == "LineString":
        return Polyline(tuple(GeoPoint(c[1], c[0]) for c in coords))
    if kind == "Polygon":
        ring = coords[0]
        return Polygon(tuple(GeoPoint(c[1], c[0]) for c in ring))
    raise IngestError(f"unsupported GeoJSON geometry type {kind!r}")


def read_places_geojson(path: str | Path) -> list[PlaceRecord]:
    doc = json.loads(Path(path).read_text())
    if doc.get("type") != "FeatureCollection":
        raise IngestError("expected a GeoJSON FeatureCollection")
    records = []
    for i, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties", {})
        try:
            records.append(
                PlaceRecord(
                    id=str(props["id"]),
                    name=props.get("name"),
                    fclass=props["fclass"],
                    type=props.get("type"),
                    geometry=_geojson_geometry(feature["geometry"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise IngestError(f"bad GeoJSON feature {i}: {exc}") from exc
    return records
