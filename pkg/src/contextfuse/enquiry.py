"""Enquiries over an observation context: triple-pattern evaluation with
temporal filters, R/P/PR/RP classification, purpose feasibility, feature
export, and dataset statistics.

The enquiry surface is a conjunction of (subject, predicate, object)
patterns where any term may be a variable ("?name"). Aggregation is left
to post-processing over the returned bindings.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .graph import Literal, Provenance
from .timeutil import TimeInterval
from .unify import ObservationContext
from .vocab import HOME_WHERE_ANSWERS, RESIDENCE_TYPES

logger = logging.getLogger(__name__)


class EnquiryError(ValueError):
    """Invalid enquiry or infeasible export request."""


def is_variable(term) -> bool:
    return isinstance(term, str) and term.startswith("?")


@dataclass(frozen=True)
class Pattern:
    subject: Literal
    predicate: Literal
    object: Literal

    @property
    def terms(self) -> tuple[Literal, Literal, Literal]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class Enquiry:
    patterns: tuple[Pattern, ...]
    temporal: TimeInterval | None = None
    scope: frozenset[int] | None = None
    select: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.patterns:
            raise EnquiryError("enquiry needs at least one pattern")
        if self.scope is not None:
            object.__setattr__(self, "scope", frozenset(self.scope))
        if self.select is not None:
            unknown = set(self.select) - self.variables()
            if unknown:
                raise EnquiryError(f"selected variables {sorted(unknown)} do not occur in any pattern")

    def variables(self) -> set[str]:
        return {t for p in self.patterns for t in p.terms if is_variable(t)}

    def projected(self) -> tuple[str, ...]:
        return self.select if self.select is not None else tuple(sorted(self.variables()))

    def to_json(self) -> dict:
        return {
            "patterns": [[p.subject, p.predicate, p.object] for p in self.patterns],
            "temporal": self.temporal.to_json() if self.temporal else None,
            "scope": sorted(self.scope) if self.scope is not None else None,
            "select": list(self.select) if self.select is not None else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Enquiry":
        return cls(
            patterns=tuple(Pattern(*p) for p in d["patterns"]),
            temporal=TimeInterval.from_json(d["temporal"]) if d.get("temporal") else None,
            scope=frozenset(d["scope"]) if d.get("scope") is not None else None,
            select=tuple(d["select"]) if d.get("select") is not None else None,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Enquiry":
        return cls.from_json(json.loads(Path(path).read_text()))


class EnquiryClass(str, Enum):
    R = "R"
    P = "P"
    PR = "PR"
    RP = "RP"


@dataclass(frozen=True)
class StoreTriple:
    """One fact in the flattened observation store."""

    subject: Literal
    predicate: str
    object: Literal
    validity: TimeInterval | None
    provenance: Provenance
    userid: int | None  # owning stream for personal facts

    @property
    def terms(self) -> tuple[Literal, str, Literal]:
        return (self.subject, self.predicate, self.object)


def _qualify(anon_id: str, userid: int) -> str:
    """Stream-scoped anonymous ids get a per-user suffix in the store so
    ids from different streams never collide."""
    return f"{anon_id}@{userid}"


class ObservationStore:
    """Flattened triple view over an observation context.

    Includes entity fields (Name/Class/Type) as virtual reference triples
    so enquiries can constrain them like any other fact.
    """

    def __init__(self, obs: ObservationContext):
        self.obs = obs
        self.records: list[StoreTriple] = []
        self.reference_entity_ids = set(obs.reference.entities)
        self._build()
        self._by_predicate: dict[str, list[StoreTriple]] = {}
        for record in self.records:
            self._by_predicate.setdefault(record.predicate, []).append(record)

    def _build(self) -> None:
        for entity in self.obs.reference.entities.values():
            if entity.name is not None:
                self.records.append(
                    StoreTriple(entity.id, "Name", entity.name, None, Provenance.REFERENCE, None)
                )
            self.records.append(
                StoreTriple(entity.id, "Class", entity.klass, None, Provenance.REFERENCE, None)
            )
            if "type" in entity.properties:
                self.records.append(
                    StoreTriple(entity.id, "Type", entity.properties["type"], None, Provenance.REFERENCE, None)
                )
        for t in self.obs.reference.triples:
            self.records.append(
                StoreTriple(t.subject, t.predicate, t.object, t.validity, t.provenance, None)
            )
        for stream in self.obs.streams:
            for ctx in stream.contexts:
                for anon_id, etype in ctx.anonymous_entities.items():
                    self.records.append(
                        StoreTriple(
                            _qualify(anon_id, ctx.userid),
                            "Class",
                            etype.lower(),
                            ctx.interval,
                            Provenance.PERSONAL,
                            ctx.userid,
                        )
                    )
                for t in ctx.triples:
                    subject = (
                        _qualify(t.subject, ctx.userid) if str(t.subject).startswith("#") else t.subject
                    )
                    obj = t.object
                    if t.object_is_entity and str(obj).startswith("#"):
                        obj = _qualify(obj, ctx.userid)
                    self.records.append(
                        StoreTriple(subject, t.predicate, obj, t.validity, t.provenance, ctx.userid)
                    )
        for t in self.obs.derived_triples:
            self.records.append(
                StoreTriple(t.subject, t.predicate, t.object, t.validity, t.provenance, _triple_userid(t))
            )

    def candidates(self, predicate) -> list[StoreTriple]:
        if is_variable(predicate) or not isinstance(predicate, str):
            return self.records
        return self._by_predicate.get(predicate, [])


def _triple_userid(t) -> int | None:
    for term in (t.subject, t.object):
        text = str(term)
        if text.startswith("User") and text[4:].isdigit():
            return int(text[4:])
    return None


def _record_admissible(record: StoreTriple, enquiry: Enquiry) -> bool:
    if enquiry.scope is not None and record.userid is not None and record.userid not in enquiry.scope:
        return False
    if enquiry.temporal is not None and record.validity is not None:
        if not record.validity.overlaps(enquiry.temporal):
            return False
    return True


def _match_term(term, value, binding: dict) -> dict | None:
    if is_variable(term):
        if term not in binding:
            extended = dict(binding)
            extended[term] = value
            return extended
        return binding if binding[term] == value else None
    return binding if term == value else None


def _pattern_matches(pattern: Pattern, record: StoreTriple) -> bool:
    binding: dict | None = {}
    for term, value in zip(pattern.terms, record.terms):
        binding = _match_term(term, value, binding)
        if binding is None:
            return False
    return True


def _evaluate_with_support(
    enquiry: Enquiry, store: ObservationStore
) -> list[tuple[dict, list[StoreTriple]]]:
    for p in enquiry.patterns:
        if not is_variable(p.predicate) and isinstance(p.predicate, str):
            if p.predicate not in store._by_predicate:
                logger.warning("enquiry uses unknown predicate %r; no results", p.predicate)
                return []
    rows: list[tuple[dict, list[StoreTriple]]] = [({}, [])]
    for pattern in enquiry.patterns:
        next_rows: list[tuple[dict, list[StoreTriple]]] = []
        for binding, support in rows:
            for record in store.candidates(pattern.predicate):
                if not _record_admissible(record, enquiry):
                    continue
                b = _match_term(pattern.subject, record.subject, binding)
                if b is None:
                    continue
                b = _match_term(pattern.predicate, record.predicate, b)
                if b is None:
                    continue
                b = _match_term(pattern.object, record.object, b)
                if b is None:
                    continue
                next_rows.append((b, support + [record]))
        rows = next_rows
        if not rows:
            break
    return rows


def evaluate(enquiry: Enquiry, obs: ObservationContext) -> list[dict]:
    """All variable bindings satisfying every pattern, deduplicated and in
    lexicographic order. Time-invariant facts match any temporal filter."""
    store = ObservationStore(obs)
    rows = _evaluate_with_support(enquiry, store)
    projected = enquiry.projected()
    seen = set()
    results = []
    for binding, _ in rows:
        item = {v: binding[v] for v in projected}
        key = tuple(str(item[v]) for v in projected)
        if key not in seen:
            seen.add(key)
            results.append(item)
    results.sort(key=lambda item: tuple(str(item[v]) for v in projected))
    return results


def classify_enquiry(enquiry: Enquiry, obs: ObservationContext) -> EnquiryClass:
    """Classify by the provenance of the facts that support the answers.

    Reference-only support is R; single-user personal-only support is P.
    Mixed support splits on the projected variables: if every projected
    variable is bound only by reference or derived facts the enquiry reads
    the reference side (PR), otherwise it reads the personal side (RP).
    """
    store = ObservationStore(obs)
    rows = _evaluate_with_support(enquiry, store)
    if rows:
        support_sets = [support for _, support in rows]
    else:
        # nothing satisfies the conjunction; fall back to per-pattern matches
        support_sets = []
        for pattern in enquiry.patterns:
            matched = [
                record
                for record in store.candidates(pattern.predicate)
                if _record_admissible(record, enquiry) and _pattern_matches(pattern, record)
            ]
            support_sets.append(matched)
    all_records = [record for support in support_sets for record in support]
    provenances = {record.provenance for record in all_records}
    if provenances <= {Provenance.REFERENCE}:
        return EnquiryClass.R
    userids = {record.userid for record in all_records if record.userid is not None}
    touches_reference_entity = any(
        term in store.reference_entity_ids
        for pattern in enquiry.patterns
        for term in pattern.terms
        if isinstance(term, str) and not is_variable(term)
    )
    if provenances <= {Provenance.PERSONAL} and len(userids) == 1 and not touches_reference_entity:
        return EnquiryClass.P
    # mixed: side of each projected variable decides
    var_provenance: dict[str, set[Provenance]] = {v: set() for v in enquiry.projected()}
    if rows:
        for binding, support in rows:
            for pattern, record in zip(enquiry.patterns, support):
                for term in pattern.terms:
                    if is_variable(term) and term in var_provenance:
                        var_provenance[term].add(record.provenance)
    else:
        for pattern, matched in zip(enquiry.patterns, support_sets):
            for term in pattern.terms:
                if is_variable(term) and term in var_provenance:
                    var_provenance[term].update(record.provenance for record in matched)
    reference_side = {Provenance.REFERENCE, Provenance.DERIVED}
    if all(provs <= reference_side for provs in var_provenance.values() if provs):
        return EnquiryClass.PR
    return EnquiryClass.RP


# --- purpose feasibility -------------------------------------------------

REFERENCE_SCHEMA = frozenset({"id", "name", "class", "type", "geometry", "coordinates"})
PERSONAL_SCHEMA = frozenset(
    {"userid", "timestamp", "day_of_week", "time_of_day", "where", "what", "withWhom", "mood", "position"}
)
UNIFIED_SCHEMA = REFERENCE_SCHEMA | PERSONAL_SCHEMA

SOURCES = ("reference", "personal", "unified")


def source_schema(source: str) -> frozenset[str]:
    if source == "reference":
        return REFERENCE_SCHEMA
    if source == "personal":
        return PERSONAL_SCHEMA
    if source == "unified":
        return UNIFIED_SCHEMA
    raise EnquiryError(f"unknown source {source!r}")


def purpose_feasibility(schema, target: str, features) -> bool:
    """True iff the schema carries the target and every feature property."""
    available = set(schema)
    return target in available and set(features) <= available


@dataclass(frozen=True)
class PredictionEnquiry:
    """A binary prediction task: target property, per-source features, and
    the predicate that labels a row positive."""

    id: str
    description: str
    target: str
    features_by_source: dict[str, tuple[str, ...]]

    def features_for(self, source: str) -> tuple[str, ...]:
        return self.features_by_source.get(source, self.features_by_source["unified"])


PREDICTION_ENQUIRIES: dict[str, PredictionEnquiry] = {
    "E1": PredictionEnquiry(
        id="E1",
        description="Is a place classified as a residence?",
        target="type",
        features_by_source={
            "reference": ("name", "class"),
            "unified": ("day_of_week", "time_of_day", "name", "class"),
        },
    ),
    "E2": PredictionEnquiry(
        id="E2",
        description="Is a user at a living place?",
        target="where",
        features_by_source={
            "personal": ("what", "withWhom", "mood"),
            "unified": ("name", "class", "what", "withWhom", "mood"),
        },
    ),
    "E3": PredictionEnquiry(
        id="E3",
        description="Is a user in a bank?",
        target="class",
        features_by_source={
            "unified": ("what", "where", "withWhom", "mood"),
        },
    ),
}


def feasibility_matrix(enquiry_id: str) -> dict[str, bool]:
    """Per-source feasibility verdicts for one prediction enquiry."""
    spec = PREDICTION_ENQUIRIES.get(enquiry_id)
    if spec is None:
        raise EnquiryError(f"unknown prediction enquiry {enquiry_id!r}")
    return {
        source: purpose_feasibility(source_schema(source), spec.target, spec.features_for(source))
        for source in SOURCES
    }


# --- feature export ------------------------------------------------------

TIME_OF_DAY_BINS = (("night", 0, 6), ("morning", 6, 12), ("afternoon", 12, 18), ("evening", 18, 24))


def time_of_day(hour: int) -> str:
    for name, lo, hi in TIME_OF_DAY_BINS:
        if lo <= hour < hi:
            return name
    raise ValueError(f"hour {hour} outside [0, 24)")


def day_of_week(t) -> str:
    return t.strftime("%A")


@dataclass
class FeatureTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    targets: list[bool] = field(default_factory=list)

    def append(self, row: list, target: bool) -> None:
        if len(row) != len(self.columns):
            raise EnquiryError(f"row width {len(row)} != {len(self.columns)} columns")
        self.rows.append(row)
        self.targets.append(target)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path: str | Path) -> int:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.columns + ["target"])
            for row, target in zip(self.rows, self.targets):
                writer.writerow(list(row) + ["true" if target else "false"])
        return Path(path).stat().st_size


def _check_feasible(enquiry_id: str, source: str) -> PredictionEnquiry:
    spec = PREDICTION_ENQUIRIES.get(enquiry_id)
    if spec is None:
        raise EnquiryError(f"unknown prediction enquiry {enquiry_id!r}")
    schema = source_schema(source)
    missing = [p for p in (spec.target, *spec.features_for(source)) if p not in schema]
    if missing:
        raise EnquiryError(
            f"{enquiry_id} is infeasible on source {source!r}: missing properties {missing}"
        )
    return spec


def export_features(obs: ObservationContext, enquiry_id: str, source: str = "unified") -> FeatureTable:
    """Build the feature table for one prediction enquiry.

    Row populations: E1 draws from resolved place visits (or the place
    entities themselves on the reference source), E2 from timed contexts
    with a location answer, E3 from resolved contexts.
    """
    spec = _check_feasible(enquiry_id, source)
    features = list(spec.features_for(source))
    table = FeatureTable(columns=features)
    if enquiry_id == "E1":
        if source == "reference":
            for entity in obs.reference.entities.values():
                row = [entity.name or "", entity.klass]
                target = entity.properties.get("type") in RESIDENCE_TYPES
                table.append(row, target)
            return table
        for r in obs.resolutions:
            entity = obs.reference.entities[r.reference_id]
            center = r.interval.center
            row = [day_of_week(center), time_of_day(center.hour), entity.name or "", entity.klass]
            table.append(row, entity.properties.get("type") in RESIDENCE_TYPES)
        return table
    if enquiry_id == "E2":
        for stream in obs.streams:
            for context_index, ctx in enumerate(stream.contexts):
                where = ctx.answers.get("where")
                if where is None:
                    continue  # no target value for this row
                row = []
                if source == "unified":
                    resolution = obs.resolution_for(stream.userid, context_index)
                    if resolution is not None:
                        entity = obs.reference.entities[resolution.reference_id]
                        row += [entity.name or "", entity.klass]
                    else:
                        row += ["", ""]
                row += [
                    ctx.answers.get("what") or "",
                    ctx.answers.get("withWhom") or "",
                    ctx.answers.get("mood") if ctx.answers.get("mood") is not None else "",
                ]
                table.append(row, where in HOME_WHERE_ANSWERS)
        return table
    # E3: resolved contexts only
    for stream in obs.streams:
        for context_index, ctx in enumerate(stream.contexts):
            resolution = obs.resolution_for(stream.userid, context_index)
            if resolution is None:
                continue
            entity = obs.reference.entities[resolution.reference_id]
            row = [
                ctx.answers.get("what") or "",
                ctx.answers.get("where") or "",
                ctx.answers.get("withWhom") or "",
                ctx.answers.get("mood") if ctx.answers.get("mood") is not None else "",
            ]
            table.append(row, entity.klass == "bank")
    return table


def observation_stats(obs: ObservationContext, export_sizes: dict[str, int] | None = None) -> dict:
    """Counts of graph pieces plus unification statistics."""
    stats = {
        "reference_entities": len(obs.reference.entities),
        "reference_triples": len(obs.reference.triples),
        "streams": len(obs.streams),
        "timed_contexts": sum(len(s.contexts) for s in obs.streams),
        "unified_contexts": obs.stats.unified_context_count,
        "derived_relations": obs.stats.derived_relation_count,
        "matched_reference_entities": obs.stats.matched_reference_entity_count,
        "coverage_fraction": obs.stats.coverage_fraction,
        "relation_breakdown": dict(sorted(obs.stats.relation_breakdown.items())),
    }
    if export_sizes is not None:
        stats["export_bytes"] = sum(export_sizes.values())
    return stats
