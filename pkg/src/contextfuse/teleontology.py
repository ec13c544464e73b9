"""Schema stages for context graphs.

Three stages: STLO (spatial object types), KTLO (entity-type hierarchy
rooted at Entity), and ETG (flattened per-purpose type graph with no
inheritance links). Each stage is an immutable value.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)

DATATYPES = ("string", "integer", "float", "geopoint", "interval")


class SchemaError(ValueError):
    """Invalid schema construction or selection."""


class Stage(str, Enum):
    STLO = "STLO"
    KTLO = "KTLO"
    ETG = "ETG"


@dataclass(frozen=True)
class Etype:
    """Entity type node: data properties (name, datatype) and object
    properties (name, target etype id)."""

    id: str
    name: str = ""
    parent: str | None = None
    data_properties: tuple[tuple[str, str], ...] = ()
    object_properties: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            object.__setattr__(self, "name", self.id)
        object.__setattr__(self, "data_properties", tuple(tuple(p) for p in self.data_properties))
        object.__setattr__(self, "object_properties", tuple(tuple(p) for p in self.object_properties))
        for prop_name, datatype in self.data_properties:
            if datatype not in DATATYPES:
                raise SchemaError(f"unknown datatype {datatype!r} on property {prop_name!r}")
        own = [n for n, _ in self.data_properties] + [n for n, _ in self.object_properties]
        if len(own) != len(set(own)):
            raise SchemaError(f"duplicate property names on etype {self.id!r}")

    def property_names(self) -> set[str]:
        return {n for n, _ in self.data_properties} | {n for n, _ in self.object_properties}


@dataclass(frozen=True)
class Teleontology:
    stage: Stage
    etypes: dict[str, Etype]
    root: str
    box_label: str = ""
    box_period: str = ""

    def __post_init__(self) -> None:
        if self.root not in self.etypes:
            raise SchemaError(f"root etype {self.root!r} missing")
        names = [e.name for e in self.etypes.values()]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate etype names")
        for e in self.etypes.values():
            if e.parent is not None and e.parent not in self.etypes:
                raise SchemaError(f"etype {e.id!r} has unknown parent {e.parent!r}")
        if self.stage is Stage.ETG:
            linked = [e.id for e in self.etypes.values() if e.parent is not None]
            if linked:
                raise SchemaError(f"ETG etypes must not carry parent links: {linked}")
        else:
            self._check_rooted_tree()

    def _check_rooted_tree(self) -> None:
        for e in self.etypes.values():
            seen = {e.id}
            node = e
            while node.parent is not None:
                if node.parent in seen:
                    raise SchemaError(f"parent cycle through etype {node.parent!r}")
                seen.add(node.parent)
                node = self.etypes[node.parent]
            if node.id != self.root:
                raise SchemaError(f"etype {e.id!r} not connected to root {self.root!r}")

    def ancestors(self, etype_id: str) -> list[Etype]:
        """Chain from the etype's parent up to the root."""
        chain = []
        node = self.etypes[etype_id]
        while node.parent is not None:
            node = self.etypes[node.parent]
            chain.append(node)
        return chain

    def closure(self, etype_id: str) -> tuple[dict[str, str], dict[str, str]]:
        """Inherited (data, object) properties; own definitions shadow
        inherited ones of the same name."""
        if etype_id not in self.etypes:
            raise SchemaError(f"unknown etype {etype_id!r}")
        data: dict[str, str] = {}
        objects: dict[str, str] = {}
        chain = list(reversed(self.ancestors(etype_id))) + [self.etypes[etype_id]]
        for node in chain:
            for prop_name, datatype in node.data_properties:
                if prop_name in data or prop_name in objects:
                    logger.warning(
                        "property %r on etype %r shadows an inherited definition", prop_name, node.id
                    )
                data[prop_name] = datatype
                objects.pop(prop_name, None)
            for prop_name, target in node.object_properties:
                if prop_name in data or prop_name in objects:
                    logger.warning(
                        "property %r on etype %r shadows an inherited definition", prop_name, node.id
                    )
                objects[prop_name] = target
                data.pop(prop_name, None)
        return data, objects

    def property_names(self) -> set[str]:
        names: set[str] = set()
        for e in self.etypes.values():
            names |= e.property_names()
        return names

    def to_json(self) -> dict:
        return {
            "stage": self.stage.value,
            "etypes": [
                {
                    "id": e.id,
                    "name": e.name,
                    "parent": e.parent,
                    "data_properties": [list(p) for p in e.data_properties],
                    "object_properties": [list(p) for p in e.object_properties],
                }
                for e in sorted(self.etypes.values(), key=lambda e: e.id)
            ],
            "root": self.root,
            "box": {"label": self.box_label, "period": self.box_period},
        }

    @classmethod
    def from_json(cls, d: dict) -> "Teleontology":
        etypes = {
            e["id"]: Etype(
                id=e["id"],
                name=e.get("name", e["id"]),
                parent=e.get("parent"),
                data_properties=tuple(tuple(p) for p in e.get("data_properties", [])),
                object_properties=tuple(tuple(p) for p in e.get("object_properties", [])),
            )
            for e in d["etypes"]
        }
        box = d.get("box", {})
        return cls(
            stage=Stage(d["stage"]),
            etypes=etypes,
            root=d["root"],
            box_label=box.get("label", ""),
            box_period=box.get("period", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Teleontology":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SelectionSpec:
    """Etypes to keep when flattening a KTLO, with the property subset to
    keep per etype (None keeps the full inherited closure)."""

    etypes: frozenset[str]
    properties: dict[str, frozenset[str] | None] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "etypes", frozenset(self.etypes))

    @classmethod
    def all_of(cls, ktlo: Teleontology) -> "SelectionSpec":
        return cls(etypes=frozenset(ktlo.etypes), properties={})


def default_stlo(box_label: str = "", box_period: str = "") -> Teleontology:
    """The fixed spatial-stage schema: an Object root with Id/Coordinates,
    PartIn and SpatialRelation, and Point/Line/Polygon children."""
    etypes = {
        "Object": Etype(
            id="Object",
            data_properties=(("Id", "string"), ("Coordinates", "geopoint")),
            object_properties=(("PartIn", "Object"), ("SpatialRelation", "Object")),
        ),
        "Point": Etype(id="Point", parent="Object"),
        "Line": Etype(id="Line", parent="Object"),
        "Polygon": Etype(id="Polygon", parent="Object"),
    }
    return Teleontology(Stage.STLO, etypes, root="Object", box_label=box_label, box_period=box_period)


def ktlo_from_stlo(stlo: Teleontology, entity_etypes: list[Etype] | tuple[Etype, ...] = ()) -> Teleontology:
    """Derive the entity-type hierarchy: an Entity root inheriting the
    spatial root's properties plus Name/Class/Function/Geometry, with the
    provided etypes grafted beneath it."""
    if stlo.stage is not Stage.STLO:
        raise SchemaError(f"expected STLO input, got {stlo.stage.value}")
    spatial_root = stlo.etypes[stlo.root]
    root = Etype(
        id="Entity",
        data_properties=spatial_root.data_properties
        + (("Name", "string"), ("Class", "string"), ("Function", "string"), ("Geometry", "string")),
        object_properties=tuple((name, "Entity") for name, _ in spatial_root.object_properties),
    )
    etypes: dict[str, Etype] = {"Entity": root}
    for e in entity_etypes:
        if e.id in etypes:
            raise SchemaError(f"duplicate etype name {e.id!r}")
        parent = e.parent if e.parent is not None else "Entity"
        etypes[e.id] = Etype(
            id=e.id,
            name=e.name,
            parent=parent,
            data_properties=e.data_properties,
            object_properties=e.object_properties,
        )
    return Teleontology(Stage.KTLO, etypes, root="Entity", box_label=stlo.box_label, box_period=stlo.box_period)


def etg_from_ktlo(ktlo: Teleontology, sel: SelectionSpec) -> Teleontology:
    """Flatten a KTLO: keep selected etypes, drop inheritance links, and
    give each etype the selected subset of its inherited property closure."""
    if ktlo.stage is not Stage.KTLO:
        raise SchemaError(f"expected KTLO input, got {ktlo.stage.value}")
    if not sel.etypes:
        raise SchemaError("empty etype selection")
    for etype_id in sorted(sel.etypes):
        if etype_id not in ktlo.etypes:
            raise SchemaError(f"selection references unknown etype {etype_id!r}")
    etypes: dict[str, Etype] = {}
    for etype_id in sorted(sel.etypes):
        data, objects = ktlo.closure(etype_id)
        chosen = sel.properties.get(etype_id)
        if chosen is not None:
            unknown = set(chosen) - set(data) - set(objects)
            if unknown:
                raise SchemaError(
                    f"selection for etype {etype_id!r} references unknown properties {sorted(unknown)}"
                )
            data = {n: t for n, t in data.items() if n in chosen}
            objects = {n: t for n, t in objects.items() if n in chosen}
        etypes[etype_id] = Etype(
            id=etype_id,
            name=ktlo.etypes[etype_id].name,
            parent=None,
            data_properties=tuple(sorted(data.items())),
            object_properties=tuple(sorted(objects.items())),
        )
    root = ktlo.root if ktlo.root in etypes else sorted(etypes)[0]
    return Teleontology(Stage.ETG, etypes, root=root, box_label=ktlo.box_label, box_period=ktlo.box_period)
