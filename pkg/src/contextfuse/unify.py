"""Context unification: align the two schemas, link timed contexts to
nearby reference places, resolve anonymous places to concrete entities,
and cross-link streams by co-location.

Unification runs in two phases: every stream against the reference graph
first, then every pair of streams. Cross-stream links therefore build on
already-objectified positions.
"""

from __future__ import annotations

import json
import logging
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .geo import SpatialIndex, geo_distance
from .graph import EntityGraph, Provenance, Triple, dumps_canonical
from .personal import PersonalStream, TimedPersonalContext
from .teleontology import Stage, Teleontology
from .timeutil import TimeInterval
from .vocab import shared_etype_pairs

logger = logging.getLogger(__name__)

NEAR_PREDICATE = "Near"
SAME_ENTITY_PREDICATE = "SameEntity"


class UnifyError(ValueError):
    """Inconsistent unification input."""


@dataclass(frozen=True)
class MappingConfig:
    """Declarative schema alignment: personal-to-reference etype and
    property name pairs."""

    etype_pairs: tuple[tuple[str, str], ...] = ()
    property_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "etype_pairs", tuple(tuple(p) for p in self.etype_pairs))
        object.__setattr__(self, "property_pairs", tuple(tuple(p) for p in self.property_pairs))

    def to_json(self) -> dict:
        return {
            "etype_pairs": [list(p) for p in self.etype_pairs],
            "property_pairs": [list(p) for p in self.property_pairs],
        }

    @classmethod
    def from_json(cls, d: dict) -> "MappingConfig":
        return cls(
            etype_pairs=tuple(tuple(p) for p in d.get("etype_pairs", [])),
            property_pairs=tuple(tuple(p) for p in d.get("property_pairs", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MappingConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def default_mapping() -> MappingConfig:
    return MappingConfig(etype_pairs=shared_etype_pairs())


@dataclass(frozen=True)
class Alignment:
    """Bidirectional etype/property lookup produced by schema alignment.

    Unmapped items pass through unaligned and are reported, not rejected.
    """

    etype_p2r: dict[str, str]
    etype_r2p: dict[str, str]
    prop_p2r: dict[str, str]
    prop_r2p: dict[str, str]
    unaligned_personal_etypes: frozenset[str]
    unaligned_reference_etypes: frozenset[str]

    def reference_etype_for(self, personal_etype: str) -> str | None:
        return self.etype_p2r.get(personal_etype)

    def personal_etype_for(self, reference_etype: str) -> str | None:
        return self.etype_r2p.get(reference_etype)


def epu_align(
    personal_etg: Teleontology, reference_etg: Teleontology, mapping: MappingConfig
) -> Alignment:
    """Validate the declared pairs against both schemas and build lookups."""
    for etg, label in ((personal_etg, "personal"), (reference_etg, "reference")):
        if etg.stage is not Stage.ETG:
            raise UnifyError(f"{label} schema must be an ETG, got {etg.stage.value}")
    etype_p2r: dict[str, str] = {}
    etype_r2p: dict[str, str] = {}
    for personal_name, reference_name in mapping.etype_pairs:
        if personal_name not in personal_etg.etypes:
            raise UnifyError(f"mapping references unknown personal etype {personal_name!r}")
        if reference_name not in reference_etg.etypes:
            raise UnifyError(f"mapping references unknown reference etype {reference_name!r}")
        etype_p2r[personal_name] = reference_name
        etype_r2p[reference_name] = personal_name
    personal_props = personal_etg.property_names()
    reference_props = reference_etg.property_names()
    prop_p2r: dict[str, str] = {}
    prop_r2p: dict[str, str] = {}
    for personal_name, reference_name in mapping.property_pairs:
        if personal_name not in personal_props:
            raise UnifyError(f"mapping references unknown personal property {personal_name!r}")
        if reference_name not in reference_props:
            raise UnifyError(f"mapping references unknown reference property {reference_name!r}")
        prop_p2r[personal_name] = reference_name
        prop_r2p[reference_name] = personal_name
    unaligned_p = frozenset(personal_etg.etypes) - set(etype_p2r)
    unaligned_r = frozenset(reference_etg.etypes) - set(etype_r2p)
    if unaligned_p or unaligned_r:
        logger.info(
            "alignment leaves %d personal and %d reference etypes unaligned",
            len(unaligned_p),
            len(unaligned_r),
        )
    return Alignment(etype_p2r, etype_r2p, prop_p2r, prop_r2p, unaligned_p, unaligned_r)


@dataclass(frozen=True)
class UnificationParams:
    near_threshold_m: float = 50.0
    coidentity_eps_m: float = 25.0
    coidentity_min_overlap: int = 10

    def __post_init__(self) -> None:
        if self.near_threshold_m <= 0 or self.coidentity_eps_m <= 0 or self.coidentity_min_overlap <= 0:
            raise UnifyError("unification parameters must be positive")


def stu_near(
    ctx: TimedPersonalContext, index: SpatialIndex, params: UnificationParams
) -> list[Triple]:
    """Near triples from the context's estimated position to every
    reference entity within the threshold; empty without a position."""
    if ctx.estimated_position is None:
        return []
    triples = []
    for place_id, distance in index.query_within(ctx.estimated_position, params.near_threshold_m):
        triples.append(
            Triple(
                ctx.user_entity_id,
                NEAR_PREDICATE,
                place_id,
                validity=ctx.interval,
                provenance=Provenance.DERIVED,
                object_is_entity=True,
                distance_m=distance,
            )
        )
    return triples


@dataclass(frozen=True)
class Resolution:
    """An anonymous place identified as a concrete reference entity."""

    userid: int
    context_index: int
    anonymous_id: str
    reference_id: str
    distance_m: float
    interval: TimeInterval

    def to_json_dict(self) -> dict:
        return {
            "userid": self.userid,
            "context_index": self.context_index,
            "anonymous_id": self.anonymous_id,
            "reference_id": self.reference_id,
            "distance_m": self.distance_m,
            "interval": self.interval.to_json(),
        }


def eu_resolve(
    ctx: TimedPersonalContext,
    near_places: list[tuple[str, float]],
    alignment: Alignment,
    reference: EntityGraph,
    context_index: int = 0,
    required_name: str | None = None,
) -> Resolution | None:
    """Pick the closest nearby entity whose etype aligns with the
    context's anonymous place etype; ties break on ascending entity id.

    ``near_places`` must be sorted ascending by distance. ``required_name``
    optionally pre-filters candidates by entity name; the default leaves
    naming out of the decision.
    """
    anon = ctx.anonymous_place
    if anon is None:
        return None
    anon_id, anon_etype = anon
    target_etype = alignment.reference_etype_for(anon_etype)
    if target_etype is None:
        return None
    best: tuple[float, str] | None = None
    for place_id, distance in near_places:
        entity = reference.entities[place_id]
        if entity.etype != target_etype:
            continue
        if required_name is not None and entity.name != required_name:
            continue
        key = (distance, place_id)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    distance, place_id = best
    return Resolution(
        userid=ctx.userid,
        context_index=context_index,
        anonymous_id=anon_id,
        reference_id=place_id,
        distance_m=distance,
        interval=ctx.interval,
    )


@dataclass
class CoidentityResult:
    same_entity: bool
    triples: list[Triple] = field(default_factory=list)
    overlap_count: int = 0


def _overlapping_pairs(a: PersonalStream, b: PersonalStream):
    """Positioned context pairs whose intervals intersect with positive
    duration, in (a-index, b-index) order."""
    b_sorted = sorted(range(len(b.contexts)), key=lambda j: (b.contexts[j].interval.start, j))
    b_starts = [b.contexts[j].interval.start for j in b_sorted]
    max_b_width = max((c.interval.duration for c in b.contexts), default=timedelta(0))
    pairs = []
    for ci in a.contexts:
        if ci.estimated_position is None:
            continue
        lo = bisect_left(b_starts, ci.interval.start - max_b_width)
        hi = bisect_left(b_starts, ci.interval.end)
        matched = []
        for k in range(lo, hi):
            cj = b.contexts[b_sorted[k]]
            if cj.estimated_position is None:
                continue
            inter = ci.interval.intersection(cj.interval)
            if inter is None or inter.duration.total_seconds() <= 0:
                continue
            matched.append((b_sorted[k], cj, inter))
        for _, cj, inter in sorted(matched, key=lambda m: m[0]):
            pairs.append((ci, cj, inter))
    return pairs


def stu_coidentity(a: PersonalStream, b: PersonalStream, params: UnificationParams) -> CoidentityResult:
    """Judge whether two streams trace the same entity; otherwise emit
    co-location Near triples for overlapping positioned contexts.

    Same-entity needs at least ``coidentity_min_overlap`` overlapping pairs
    with every pairwise distance within ``coidentity_eps_m``.
    """
    if a.userid == b.userid:
        raise UnifyError("co-identity requires two distinct participants")
    first, second = (a, b) if a.userid < b.userid else (b, a)
    pairs = _overlapping_pairs(first, second)
    if not pairs:
        return CoidentityResult(same_entity=False)
    distances = [
        (ci, cj, inter, geo_distance(ci.estimated_position, cj.estimated_position))
        for ci, cj, inter in pairs
    ]
    if len(distances) >= params.coidentity_min_overlap and all(
        d <= params.coidentity_eps_m for _, _, _, d in distances
    ):
        span = TimeInterval(
            min(inter.start for _, _, inter, _ in distances),
            max(inter.end for _, _, inter, _ in distances),
        )
        triple = Triple(
            f"User{first.userid}",
            SAME_ENTITY_PREDICATE,
            f"User{second.userid}",
            validity=span,
            provenance=Provenance.DERIVED,
            object_is_entity=True,
        )
        return CoidentityResult(same_entity=True, triples=[triple], overlap_count=len(distances))
    triples = []
    for ci, cj, inter, d in distances:
        if d <= params.near_threshold_m:
            triples.append(
                Triple(
                    f"User{first.userid}",
                    NEAR_PREDICATE,
                    f"User{second.userid}",
                    validity=inter,
                    provenance=Provenance.DERIVED,
                    object_is_entity=True,
                    distance_m=d,
                )
            )
    return CoidentityResult(same_entity=False, triples=triples, overlap_count=len(distances))


@dataclass
class UnificationStats:
    unified_context_count: int = 0
    derived_relation_count: int = 0
    matched_reference_entity_count: int = 0
    coverage_fraction: float = 0.0
    total_context_count: int = 0
    relation_breakdown: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "unified_context_count": self.unified_context_count,
            "derived_relation_count": self.derived_relation_count,
            "matched_reference_entity_count": self.matched_reference_entity_count,
            "coverage_fraction": self.coverage_fraction,
            "total_context_count": self.total_context_count,
            "relation_breakdown": dict(sorted(self.relation_breakdown.items())),
        }


@dataclass
class ObservationContext:
    """The unified result: the reference graph, the personal streams, the
    derived cross-link triples, and the anonymous-place resolutions."""

    reference: EntityGraph
    streams: list[PersonalStream]
    derived_triples: list[Triple] = field(default_factory=list)
    resolutions: list[Resolution] = field(default_factory=list)
    stats: UnificationStats = field(default_factory=UnificationStats)

    def resolution_for(self, userid: int, context_index: int) -> Resolution | None:
        key = (userid, context_index)
        if not hasattr(self, "_resolution_index"):
            self._resolution_index = {(r.userid, r.context_index): r for r in self.resolutions}
        return self._resolution_index.get(key)

    def validate(self) -> None:
        for r in self.resolutions:
            if r.reference_id not in self.reference.entities:
                raise UnifyError(f"resolution target {r.reference_id!r} missing from reference graph")
        for t in self.derived_triples:
            if t.validity is None:
                raise UnifyError(f"derived triple ({t.subject}, {t.predicate}, ...) lacks a validity interval")


def unify(
    reference: EntityGraph,
    streams: list[PersonalStream],
    params: UnificationParams | None = None,
    mapping: MappingConfig | None = None,
    personal_schema: Teleontology | None = None,
) -> ObservationContext:
    """Run both unification phases and collect statistics.

    Phase 1 links each stream's contexts to nearby reference entities and
    resolves anonymous places. Phase 2 compares stream pairs for
    co-identity and co-location. Deterministic for a given input order.
    """
    params = params or UnificationParams()
    mapping = mapping if mapping is not None else default_mapping()
    if personal_schema is None:
        from .vocab import personal_etg

        personal_schema = personal_etg()
    for stream in streams:
        if stream.period != reference.box.period:
            raise UnifyError(
                f"stream for user {stream.userid} has period {stream.period}, "
                f"reference box period is {reference.box.period}"
            )
    alignment = epu_align(personal_schema, reference.etg, mapping)
    positioned = [
        (e.id, e.position()) for e in reference.entities.values() if e.position() is not None
    ]
    index = SpatialIndex.build(positioned, reference.box.region, cell_size_m=100.0)

    obs = ObservationContext(reference=reference, streams=list(streams))
    resolved_entities: set[str] = set()
    for stream in streams:
        for context_index, ctx in enumerate(stream.contexts):
            near = stu_near(ctx, index, params)
            obs.derived_triples.extend(near)
            near_places = [(t.object, t.distance_m) for t in near]
            resolution = eu_resolve(ctx, near_places, alignment, reference, context_index)
            if resolution is not None:
                obs.resolutions.append(resolution)
                resolved_entities.add(resolution.reference_id)
    for i in range(len(streams)):
        for j in range(i + 1, len(streams)):
            result = stu_coidentity(streams[i], streams[j], params)
            obs.derived_triples.extend(result.triples)

    total_contexts = sum(len(s.contexts) for s in streams)
    resolved_contexts = {(r.userid, r.context_index) for r in obs.resolutions}
    obs.stats = UnificationStats(
        unified_context_count=len(resolved_contexts),
        derived_relation_count=len(obs.derived_triples),
        matched_reference_entity_count=len(resolved_entities),
        coverage_fraction=(len(resolved_contexts) / total_contexts) if total_contexts else 0.0,
        total_context_count=total_contexts,
        relation_breakdown=dict(Counter(t.predicate for t in obs.derived_triples)),
    )
    obs.validate()
    return obs


def export_observation(obs: ObservationContext, out_dir: str | Path) -> dict[str, int]:
    """Write the purpose-relevant slice of the observation context.

    Keeps the matched reference entities, the resolved contexts, every
    derived triple, and the resolution map. Returns bytes per file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes: dict[str, int] = {}

    matched_ids = sorted({r.reference_id for r in obs.resolutions})
    lines = [dumps_canonical(obs.reference.entities[eid].to_json_dict()) for eid in matched_ids]
    data = "\n".join(lines) + ("\n" if lines else "")
    (out / "matched_entities.jsonl").write_text(data)
    sizes["matched_entities.jsonl"] = len(data.encode())

    lines = [dumps_canonical(t.to_json_dict()) for t in obs.derived_triples]
    data = "\n".join(lines) + ("\n" if lines else "")
    (out / "derived_triples.jsonl").write_text(data)
    sizes["derived_triples.jsonl"] = len(data.encode())

    lines = [dumps_canonical(r.to_json_dict()) for r in obs.resolutions]
    data = "\n".join(lines) + ("\n" if lines else "")
    (out / "resolutions.jsonl").write_text(data)
    sizes["resolutions.jsonl"] = len(data.encode())

    resolved_keys = {(r.userid, r.context_index) for r in obs.resolutions}
    lines = []
    for stream in obs.streams:
        for context_index, ctx in enumerate(stream.contexts):
            if (stream.userid, context_index) in resolved_keys:
                lines.append(dumps_canonical(ctx.to_json_dict()))
    data = "\n".join(lines) + ("\n" if lines else "")
    (out / "unified_contexts.jsonl").write_text(data)
    sizes["unified_contexts.jsonl"] = len(data.encode())

    stats_text = dumps_canonical(obs.stats.to_json()) + "\n"
    (out / "stats.json").write_text(stats_text)
    sizes["stats.json"] = len(stats_text.encode())
    return sizes
