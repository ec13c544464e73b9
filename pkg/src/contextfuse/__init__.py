"""contextfuse: unify a geospatial reference graph with personal diary/GPS
streams into a queryable observation context."""

from .geo import BoundingBox, GeoPoint, PointGeom, Polygon, Polyline, SpatialIndex, geo_distance
from .graph import Box, Entity, EntityGraph, Provenance, Triple
from .personal import GpsSample, Participant, PersonalStream, QuestionBattery, TimedPersonalContext
from .reference import PlaceRecord, compute_near, compute_partin, ingest_reference
from .teleontology import Etype, SelectionSpec, Stage, Teleontology, default_stlo, etg_from_ktlo, ktlo_from_stlo
from .timeutil import TimeInterval, parse_ts
from .unify import MappingConfig, ObservationContext, UnificationParams, unify

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Box",
    "Entity",
    "EntityGraph",
    "Etype",
    "GeoPoint",
    "GpsSample",
    "MappingConfig",
    "ObservationContext",
    "Participant",
    "PersonalStream",
    "PlaceRecord",
    "PointGeom",
    "Polygon",
    "Polyline",
    "Provenance",
    "QuestionBattery",
    "SelectionSpec",
    "SpatialIndex",
    "Stage",
    "Teleontology",
    "TimeInterval",
    "TimedPersonalContext",
    "Triple",
    "UnificationParams",
    "compute_near",
    "compute_partin",
    "default_stlo",
    "etg_from_ktlo",
    "geo_distance",
    "ingest_reference",
    "ktlo_from_stlo",
    "parse_ts",
    "unify",
]
