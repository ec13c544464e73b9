"""Command-line surface for the pipeline.

Subcommands: synth, ingest-reference, ingest-personal, unify, enquire,
feasibility, export-features, stats, show-config. One self-describing JSON
config file drives every command; flags override individual fields. All
outputs are deterministic for a given config and input data.

Exit codes: 0 success, 1 config or validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .enquiry import (
    Enquiry,
    classify_enquiry,
    evaluate,
    export_features,
    feasibility_matrix,
    observation_stats,
)
from .geo import BoundingBox
from .graph import dumps_canonical, read_reference_graph, write_reference_graph
from .personal import (
    Participant,
    build_stream,
    read_batteries_csv,
    read_gps_csv,
    read_streams,
    write_streams,
)
from .reference import compute_near, compute_partin, ingest_reference, read_places_csv, read_places_geojson
from .synth import SynthSpec, gen_dataset, write_dataset
from .timeutil import TimeInterval
from .unify import MappingConfig, UnificationParams, default_mapping, export_observation, unify
from .vocab import reference_etg

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


@dataclass
class RunConfig:
    bbox: BoundingBox = field(default_factory=lambda: BoundingBox(45.95, 46.15, 10.95, 11.25))
    period: TimeInterval = field(
        default_factory=lambda: TimeInterval.from_json(["05-08 22:00:00", "06-05 22:00:00"])
    )
    location_label: str = "region"
    near_threshold_m: float = 50.0
    place_near_threshold_m: float = 100.0
    dbscan_eps_m: float = 30.0
    dbscan_min_pts: int = 3
    position_window_s: float = 600.0
    coidentity_eps_m: float = 25.0
    coidentity_min_overlap: int = 10
    spacing_minutes_per_week: tuple[int, ...] = (30, 30, 60, 60)
    seed: int = 7
    places_csv: str = "data/places.csv"
    batteries_csv: str = "data/batteries.csv"
    gps_csv: str = "data/gps.csv"
    mapping_file: str | None = None
    out_dir: str = "out"
    synth: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in (
            "near_threshold_m",
            "place_near_threshold_m",
            "dbscan_eps_m",
            "dbscan_min_pts",
            "position_window_s",
            "coidentity_eps_m",
            "coidentity_min_overlap",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")

    def to_json(self) -> dict:
        return {
            "bbox": self.bbox.to_json(),
            "period": self.period.to_json(),
            "location_label": self.location_label,
            "near_threshold_m": self.near_threshold_m,
            "place_near_threshold_m": self.place_near_threshold_m,
            "dbscan_eps_m": self.dbscan_eps_m,
            "dbscan_min_pts": self.dbscan_min_pts,
            "position_window_s": self.position_window_s,
            "coidentity_eps_m": self.coidentity_eps_m,
            "coidentity_min_overlap": self.coidentity_min_overlap,
            "spacing_minutes_per_week": list(self.spacing_minutes_per_week),
            "seed": self.seed,
            "paths": {
                "places_csv": self.places_csv,
                "batteries_csv": self.batteries_csv,
                "gps_csv": self.gps_csv,
                "mapping": self.mapping_file,
                "out_dir": self.out_dir,
            },
            "synth": self.synth,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        paths = d.get("paths", {})
        base = cls()
        return cls(
            bbox=BoundingBox.from_json(d["bbox"]) if "bbox" in d else base.bbox,
            period=TimeInterval.from_json(d["period"]) if "period" in d else base.period,
            location_label=d.get("location_label", base.location_label),
            near_threshold_m=d.get("near_threshold_m", base.near_threshold_m),
            place_near_threshold_m=d.get("place_near_threshold_m", base.place_near_threshold_m),
            dbscan_eps_m=d.get("dbscan_eps_m", base.dbscan_eps_m),
            dbscan_min_pts=d.get("dbscan_min_pts", base.dbscan_min_pts),
            position_window_s=d.get("position_window_s", base.position_window_s),
            coidentity_eps_m=d.get("coidentity_eps_m", base.coidentity_eps_m),
            coidentity_min_overlap=d.get("coidentity_min_overlap", base.coidentity_min_overlap),
            spacing_minutes_per_week=tuple(
                d.get("spacing_minutes_per_week", base.spacing_minutes_per_week)
            ),
            seed=d.get("seed", base.seed),
            places_csv=paths.get("places_csv", base.places_csv),
            batteries_csv=paths.get("batteries_csv", base.batteries_csv),
            gps_csv=paths.get("gps_csv", base.gps_csv),
            mapping_file=paths.get("mapping"),
            out_dir=paths.get("out_dir", base.out_dir),
            synth=d.get("synth", {}),
        )


def load_config(path: str | None, overrides: argparse.Namespace) -> RunConfig:
    if path is not None:
        config = RunConfig.from_json(json.loads(Path(path).read_text()))
    else:
        config = RunConfig()
    if getattr(overrides, "seed", None) is not None:
        config.seed = overrides.seed
    if getattr(overrides, "out_dir", None) is not None:
        config.out_dir = overrides.out_dir
    return config


def _unification_params(config: RunConfig) -> UnificationParams:
    return UnificationParams(
        near_threshold_m=config.near_threshold_m,
        coidentity_eps_m=config.coidentity_eps_m,
        coidentity_min_overlap=config.coidentity_min_overlap,
    )


def _mapping(config: RunConfig) -> MappingConfig:
    if config.mapping_file:
        return MappingConfig.load(config.mapping_file)
    return default_mapping()


def cmd_show_config(config: RunConfig, args: argparse.Namespace) -> int:
    print(json.dumps(config.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_synth(config: RunConfig, args: argparse.Namespace) -> int:
    synth_json = dict(config.synth)
    synth_json.setdefault("bbox", config.bbox.to_json())
    synth_json.setdefault("seed", config.seed)
    synth_json.setdefault("period_start", config.period.to_json()[0])
    synth_json.setdefault("spacing_minutes_per_week", list(config.spacing_minutes_per_week))
    spec = SynthSpec.from_json(synth_json)
    dataset = gen_dataset(spec)
    out = Path(config.places_csv).parent
    write_dataset(dataset, out)
    print(
        f"synth: {len(dataset.places)} places, {len(dataset.batteries)} batteries, "
        f"{len(dataset.samples)} GPS samples -> {out}"
    )
    return EXIT_OK


def _reference_dir(config: RunConfig) -> Path:
    return Path(config.out_dir) / "reference"


def _streams_dir(config: RunConfig) -> Path:
    return Path(config.out_dir) / "streams"


def cmd_ingest_reference(config: RunConfig, args: argparse.Namespace) -> int:
    path = Path(config.places_csv)
    if path.suffix.lower() in (".geojson", ".json"):
        records = read_places_geojson(path)
    else:
        records = read_places_csv(path)
    etg = reference_etg(config.location_label, " .. ".join(config.period.to_json()))
    graph = ingest_reference(records, config.bbox, config.period, etg, location_label=config.location_label)
    compute_partin(graph)
    compute_near(graph, threshold_m=config.place_near_threshold_m)
    graph.validate()
    write_reference_graph(graph, _reference_dir(config))
    print(
        f"ingest-reference: {len(graph.entities)} entities, {len(graph.triples)} triples "
        f"({graph.meta.get('dropped_outside_bbox', 0)} dropped outside bbox) -> {_reference_dir(config)}"
    )
    return EXIT_OK


def cmd_ingest_personal(config: RunConfig, args: argparse.Namespace) -> int:
    batteries = read_batteries_csv(config.batteries_csv)
    samples = read_gps_csv(config.gps_csv)
    userids = sorted({b.userid for b in batteries})
    streams = []
    for userid in userids:
        streams.append(
            build_stream(
                Participant(userid),
                batteries,
                samples,
                schedule=config.spacing_minutes_per_week,
                period=config.period,
                window_s=config.position_window_s,
                eps_m=config.dbscan_eps_m,
                min_pts=config.dbscan_min_pts,
            )
        )
    write_streams(streams, _streams_dir(config))
    total = sum(len(s) for s in streams)
    print(f"ingest-personal: {len(streams)} streams, {total} timed contexts -> {_streams_dir(config)}")
    return EXIT_OK


def _load_observation(config: RunConfig):
    reference = read_reference_graph(_reference_dir(config))
    streams = read_streams(_streams_dir(config))
    return unify(reference, streams, _unification_params(config), _mapping(config))


def cmd_unify(config: RunConfig, args: argparse.Namespace) -> int:
    obs = _load_observation(config)
    out = Path(config.out_dir) / "observation"
    sizes = export_observation(obs, out)
    stats = observation_stats(obs, sizes)
    (Path(config.out_dir) / "stats.json").write_text(dumps_canonical(stats) + "\n")
    print(
        f"unify: {obs.stats.unified_context_count} unified contexts, "
        f"{obs.stats.derived_relation_count} derived relations, "
        f"{obs.stats.matched_reference_entity_count} matched entities -> {out}"
    )
    return EXIT_OK


def cmd_enquire(config: RunConfig, args: argparse.Namespace) -> int:
    enquiry = Enquiry.load(args.enquiry)
    obs = _load_observation(config)
    verdict = classify_enquiry(enquiry, obs)
    bindings = evaluate(enquiry, obs)
    print(f"class: {verdict.value}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "bindings.csv"
    variables = list(enquiry.projected())
    with open(out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(variables)
        for b in bindings:
            writer.writerow([b[v] for v in variables])
    print(f"{len(bindings)} bindings -> {out}")
    return EXIT_OK


def cmd_feasibility(config: RunConfig, args: argparse.Namespace) -> int:
    matrix = feasibility_matrix(args.enquiry_id)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "feasibility.json"
    existing = {}
    if report_path.exists():
        existing = json.loads(report_path.read_text())
    existing[args.enquiry_id] = matrix
    report_path.write_text(json.dumps(existing, indent=2, sort_keys=True) + "\n")
    for source in ("reference", "personal", "unified"):
        print(f"{args.enquiry_id} {source}: {'true' if matrix[source] else 'false'}")
    return EXIT_OK


def cmd_export_features(config: RunConfig, args: argparse.Namespace) -> int:
    obs = _load_observation(config)
    table = export_features(obs, args.enquiry_id, source=args.source)
    out = Path(config.out_dir) / "features"
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.enquiry_id.lower()}_{args.source}.csv"
    table.to_csv(path)
    print(f"export-features: {len(table)} rows -> {path}")
    return EXIT_OK


def cmd_stats(config: RunConfig, args: argparse.Namespace) -> int:
    obs = _load_observation(config)
    sizes = export_observation(obs, Path(config.out_dir) / "observation")
    stats = observation_stats(obs, sizes)
    (Path(config.out_dir) / "stats.json").write_text(dumps_canonical(stats) + "\n")
    for key, value in stats.items():
        print(f"{key}: {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contextfuse",
        description="Unify a reference place graph with personal diary/GPS streams.",
    )
    parser.add_argument("--config", help="JSON config file; defaults apply when omitted")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out-dir", help="override the configured output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("show-config", help="print the effective configuration")
    sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    sub.add_parser("ingest-reference", help="build the reference entity graph")
    sub.add_parser("ingest-personal", help="build per-user timed context streams")
    sub.add_parser("unify", help="unify streams with the reference graph")

    enquire = sub.add_parser("enquire", help="evaluate a pattern enquiry")
    enquire.add_argument("enquiry", help="enquiry pattern file (JSON)")

    feasibility = sub.add_parser("feasibility", help="purpose feasibility per source")
    feasibility.add_argument("enquiry_id", choices=["E1", "E2", "E3"])

    features = sub.add_parser("export-features", help="export a prediction feature table")
    features.add_argument("enquiry_id", choices=["E1", "E2", "E3"])
    features.add_argument("--source", default="unified", choices=["reference", "personal", "unified"])

    sub.add_parser("stats", help="dataset statistics report")
    return parser


COMMANDS = {
    "show-config": cmd_show_config,
    "synth": cmd_synth,
    "ingest-reference": cmd_ingest_reference,
    "ingest-personal": cmd_ingest_personal,
    "unify": cmd_unify,
    "enquire": cmd_enquire,
    "feasibility": cmd_feasibility,
    "export-features": cmd_export_features,
    "stats": cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args)
        return COMMANDS[args.command](config, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
