import pytest

from contextfuse.geo import BoundingBox, GeoPoint, PointGeom, Polygon, geo_distance
from contextfuse.graph import Provenance
from contextfuse.reference import (
    IngestError,
    PlaceRecord,
    compute_near,
    compute_partin,
    ingest_reference,
    read_places_csv,
    read_places_geojson,
    write_places_csv,
)
from contextfuse.timeutil import TimeInterval, parse_ts
from contextfuse.vocab import reference_etg

BBOX = BoundingBox(45.9, 46.1, 10.9, 11.1)
PERIOD = TimeInterval(parse_ts("05-08 22:00:00"), parse_ts("06-05 22:00:00"))


def place(pid, lat, lon, fclass="restaurant", name=None, type_=None):
    return PlaceRecord(id=pid, name=name, fclass=fclass, type=type_, geometry=PointGeom(GeoPoint(lat, lon)))


def fresh_graph(records):
    return ingest_reference(records, BBOX, PERIOD, reference_etg())


def test_ingest_drops_records_outside_bbox():
    graph = fresh_graph([place("in", 46.0, 11.0), place("out", 48.0, 11.0)])
    assert set(graph.entities) == {"in"}
    assert graph.meta["dropped_outside_bbox"] == 1


def test_ingest_lifts_named_restaurant():
    graph = fresh_graph([place("p1", 46.0, 11.0, fclass="restaurant", name="Biba's")])
    entity = graph.entities["p1"]
    assert entity.klass == "restaurant"
    assert entity.name == "Biba's"
    assert entity.etype == "Restaurant"


def test_ingest_empty_batch():
    graph = fresh_graph([])
    assert len(graph.entities) == 0
    assert len(graph.triples) == 0


def test_ingest_duplicate_ids_rejected():
    with pytest.raises(IngestError, match="dup"):
        fresh_graph([place("dup", 46.0, 11.0), place("dup", 46.01, 11.0)])


def test_ingest_unmappable_fclass_routes_to_default():
    graph = fresh_graph([place("odd", 46.0, 11.0, fclass="zeppelin_port")])
    assert graph.entities["odd"].etype == "Place"
    assert graph.meta["unmapped_fclass"] == 1


def test_ingest_requires_etg_stage():
    from contextfuse.vocab import reference_ktlo

    with pytest.raises(IngestError):
        ingest_reference([], BBOX, PERIOD, reference_ktlo())


def test_ingest_time_invariance():
    graph = fresh_graph([place(f"p{i}", 46.0 + i * 1e-4, 11.0) for i in range(5)])
    compute_near(graph, threshold_m=100.0)
    compute_partin(graph)
    assert all(t.validity is None for t in graph.triples)
    assert all(t.provenance is Provenance.REFERENCE for t in graph.triples)


def square(pid, lat0, lon0, size, fclass="building"):
    ring = (
        GeoPoint(lat0, lon0),
        GeoPoint(lat0, lon0 + size),
        GeoPoint(lat0 + size, lon0 + size),
        GeoPoint(lat0 + size, lon0),
        GeoPoint(lat0, lon0),
    )
    return PlaceRecord(id=pid, name=None, fclass=fclass, type=None, geometry=Polygon(ring))


def partin_pairs(graph):
    return {(t.subject, t.object) for t in graph.triples_with("PartIn")}


def test_partin_point_inside_single_polygon():
    graph = fresh_graph([square("outer", 45.95, 10.95, 0.02), place("pt", 45.96, 10.96)])
    compute_partin(graph)
    assert partin_pairs(graph) == {("pt", "outer")}


def test_partin_nested_polygons():
    graph = fresh_graph(
        [
            square("big", 45.95, 10.95, 0.04),
            square("small", 45.96, 10.96, 0.01),
            place("pt", 45.965, 10.965),
        ]
    )
    compute_partin(graph)
    assert partin_pairs(graph) == {("pt", "small"), ("pt", "big"), ("small", "big")}


def test_partin_point_outside_all_polygons():
    graph = fresh_graph([square("outer", 45.95, 10.95, 0.01), place("pt", 46.05, 11.05)])
    compute_partin(graph)
    assert partin_pairs(graph) == set()


def test_partin_no_two_cycles():
    graph = fresh_graph(
        [square("big", 45.95, 10.95, 0.04), square("small", 45.96, 10.96, 0.01)]
    )
    compute_partin(graph)
    pairs = partin_pairs(graph)
    assert not any((b, a) in pairs for a, b in pairs)


def near_pairs(graph):
    return {(t.subject, t.object) for t in graph.triples_with("Near")}


def test_near_within_threshold():
    lat_step = 10.0 / 111_194.9266  # ~10 m
    graph = fresh_graph([place("a", 46.0, 11.0), place("b", 46.0 + lat_step, 11.0)])
    compute_near(graph, threshold_m=100.0)
    assert near_pairs(graph) == {("a", "b")}


def test_near_beyond_threshold():
    graph = fresh_graph([place("a", 46.0, 11.0), place("b", 46.09, 11.09)])  # ~12 km
    compute_near(graph, threshold_m=100.0)
    assert near_pairs(graph) == set()


def test_near_never_reflexive():
    graph = fresh_graph([place("a", 46.0, 11.0)])
    compute_near(graph, threshold_m=100.0)
    assert near_pairs(graph) == set()


def test_near_canonical_order_and_once():
    lat_step = 10.0 / 111_194.9266
    graph = fresh_graph([place("z", 46.0, 11.0), place("a", 46.0 + lat_step, 11.0)])
    compute_near(graph, threshold_m=100.0)
    assert near_pairs(graph) == {("a", "z")}


def test_near_matches_brute_force_all_pairs(rng):
    records = [
        place(f"p{i:04d}", rng.uniform(45.99, 46.01), rng.uniform(10.99, 11.01))
        for i in range(600)
    ]
    graph = fresh_graph(records)
    compute_near(graph, threshold_m=120.0)
    expected = set()
    positions = {r.id: r.geometry.point for r in records}
    ids = sorted(positions)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if geo_distance(positions[a], positions[b]) <= 120.0:
                expected.add((a, b))
    assert near_pairs(graph) == expected


def test_localization_invariant():
    graph = fresh_graph([place("a", 46.0, 11.0), place("b", 45.95, 10.95)])
    for entity in graph.entities.values():
        assert BBOX.contains(entity.position())


def test_csv_roundtrip(tmp_path):
    records = [
        place("p1", 46.0, 11.0, name="Biba's", type_="apartments"),
        square("p2", 45.95, 10.95, 0.01),
    ]
    path = tmp_path / "places.csv"
    write_places_csv(records, path)
    loaded = read_places_csv(path)
    assert [r.id for r in loaded] == ["p1", "p2"]
    assert loaded[0].name == "Biba's"
    assert loaded[0].type == "apartments"
    assert loaded[1].geometry.vertices == records[1].geometry.vertices


def test_geojson_reader(tmp_path):
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [11.0, 46.0]},
                "properties": {"id": "g1", "name": "Spot", "fclass": "bank"},
            },
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[10.95, 45.95], [10.96, 45.95], [10.96, 45.96], [10.95, 45.95]]],
                },
                "properties": {"id": "g2", "fclass": "building", "type": "house"},
            },
        ],
    }
    import json

    path = tmp_path / "places.geojson"
    path.write_text(json.dumps(doc))
    records = read_places_geojson(path)
    assert [r.id for r in records] == ["g1", "g2"]
    assert records[0].geometry.point == GeoPoint(46.0, 11.0)
    assert records[1].type == "house"
