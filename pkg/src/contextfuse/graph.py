"""Entity/triple graph with box metadata and line-delimited JSON export.

Reference-provenance triples are time-invariant and must not carry a
validity interval; personal and derived triples may.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .geo import BoundingBox, Geometry, GeoPoint, PointGeom, geometry_to_wkt, wkt_to_geometry
from .teleontology import Teleontology
from .timeutil import TimeInterval

Literal = str | int | float | bool


class GraphError(ValueError):
    """Inconsistent graph construction."""


class Provenance(str, Enum):
    REFERENCE = "reference"
    PERSONAL = "personal"
    DERIVED = "derived"


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: Literal
    validity: TimeInterval | None = None
    provenance: Provenance = Provenance.REFERENCE
    object_is_entity: bool = False
    distance_m: float | None = None

    def __post_init__(self) -> None:
        if self.provenance is Provenance.REFERENCE and self.validity is not None:
            raise GraphError(
                f"reference triple ({self.subject}, {self.predicate}, ...) must be time-invariant"
            )

    def to_json_dict(self) -> dict:
        d: dict = {
            "s": self.subject,
            "p": self.predicate,
            "o": self.object,
            "validity": self.validity.to_json() if self.validity else None,
            "provenance": self.provenance.value,
        }
        if self.object_is_entity:
            d["o_entity"] = True
        if self.distance_m is not None:
            d["distance_m"] = self.distance_m
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "Triple":
        return cls(
            subject=d["s"],
            predicate=d["p"],
            object=d["o"],
            validity=TimeInterval.from_json(d["validity"]) if d.get("validity") else None,
            provenance=Provenance(d["provenance"]),
            object_is_entity=bool(d.get("o_entity", False)),
            distance_m=d.get("distance_m"),
        )


@dataclass
class Entity:
    id: str
    etype: str
    klass: str
    name: str | None = None
    geometries: tuple[Geometry, ...] = ()
    properties: dict[str, Literal] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.geometries = tuple(self.geometries)
        if not self.klass:
            raise GraphError(f"entity {self.id!r} has empty class")

    def position(self) -> GeoPoint | None:
        """Representative coordinate: a point geometry if present, else the
        centroid of the first geometry."""
        for g in self.geometries:
            if isinstance(g, PointGeom):
                return g.point
        if self.geometries:
            return self.geometries[0].centroid()
        return None

    def to_json_dict(self) -> dict:
        d: dict = {
            "id": self.id,
            "etype": self.etype,
            "name": self.name,
            "class": self.klass,
            "geom": [geometry_to_wkt(g) for g in self.geometries],
        }
        if self.properties:
            d["properties"] = self.properties
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "Entity":
        return cls(
            id=d["id"],
            etype=d["etype"],
            klass=d["class"],
            name=d.get("name"),
            geometries=tuple(wkt_to_geometry(w) for w in d.get("geom", [])),
            properties=dict(d.get("properties", {})),
        )


@dataclass(frozen=True)
class Box:
    """Graph metadata: location label, spatial region, observation period."""

    label: str
    region: BoundingBox
    period: TimeInterval

    def to_json(self) -> dict:
        return {"label": self.label, "region": self.region.to_json(), "period": self.period.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "Box":
        return cls(d["label"], BoundingBox.from_json(d["region"]), TimeInterval.from_json(d["period"]))


class EntityGraph:
    """Entities plus triples under one box; built once, then treated as
    immutable for concurrent reads."""

    def __init__(self, box: Box, etg: Teleontology):
        if box.period.duration.total_seconds() <= 0:
            raise GraphError("box period must be non-empty")
        self.box = box
        self.etg = etg
        self.entities: dict[str, Entity] = {}
        self.triples: list[Triple] = []
        self._triple_set: set[Triple] = set()
        self.meta: dict[str, int] = {}

    def add_entity(self, entity: Entity) -> None:
        if entity.id in self.entities:
            raise GraphError(f"duplicate entity id {entity.id!r}")
        if entity.etype not in self.etg.etypes:
            raise GraphError(f"entity {entity.id!r} has etype {entity.etype!r} missing from the ETG")
        self.entities[entity.id] = entity

    def add_triple(self, triple: Triple) -> bool:
        """Insert unless already present; returns True when added."""
        if triple in self._triple_set:
            return False
        self._triple_set.add(triple)
        self.triples.append(triple)
        return True

    def triples_with(self, predicate: str) -> list[Triple]:
        return [t for t in self.triples if t.predicate == predicate]

    def validate(self) -> None:
        """Check entity resolution of every triple and reference
        time-invariance."""
        for t in self.triples:
            if t.subject not in self.entities:
                raise GraphError(f"triple subject {t.subject!r} does not resolve")
            if t.object_is_entity and t.object not in self.entities:
                raise GraphError(f"triple object {t.object!r} does not resolve")
            if t.provenance is Provenance.REFERENCE and t.validity is not None:
                raise GraphError("reference triple carries a validity interval")

    def __repr__(self) -> str:
        return f"EntityGraph({len(self.entities)} entities, {len(self.triples)} triples)"


def dumps_canonical(obj) -> str:
    """Deterministic single-line JSON used for all exports."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_entities_jsonl(graph: EntityGraph, path: str | Path) -> int:
    """One entity per line, insertion order; returns bytes written."""
    lines = [dumps_canonical(e.to_json_dict()) for e in graph.entities.values()]
    data = "\n".join(lines) + ("\n" if lines else "")
    Path(path).write_text(data)
    return len(data.encode())


def write_triples_jsonl(triples, path: str | Path) -> int:
    lines = [dumps_canonical(t.to_json_dict()) for t in triples]
    data = "\n".join(lines) + ("\n" if lines else "")
    Path(path).write_text(data)
    return len(data.encode())


def read_triples_jsonl(path: str | Path) -> list[Triple]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(Triple.from_json_dict(json.loads(line)))
    return out


def write_reference_graph(graph: EntityGraph, out_dir: str | Path) -> dict[str, int]:
    """Export a reference graph: entities, triples, and box/meta files.

    Returns bytes written per file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes = {
        "entities.jsonl": write_entities_jsonl(graph, out / "entities.jsonl"),
        "triples.jsonl": write_triples_jsonl(graph.triples, out / "triples.jsonl"),
    }
    meta = {"box": graph.box.to_json(), "counts": graph.meta}
    meta_text = dumps_canonical(meta) + "\n"
    (out / "meta.json").write_text(meta_text)
    graph.etg.save(out / "etg.json")
    sizes["meta.json"] = len(meta_text.encode())
    return sizes


def read_reference_graph(in_dir: str | Path) -> EntityGraph:
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    etg = Teleontology.load(src / "etg.json")
    graph = EntityGraph(Box.from_json(meta["box"]), etg)
    for line in (src / "entities.jsonl").read_text().splitlines():
        if line.strip():
            graph.add_entity(Entity.from_json_dict(json.loads(line)))
    for t in read_triples_jsonl(src / "triples.jsonl"):
        graph.add_triple(t)
    graph.meta.update(meta.get("counts", {}))
    return graph
