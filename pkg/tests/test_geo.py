import math
import random

import pytest

from contextfuse.geo import (
    BoundingBox,
    GeometryError,
    GeoPoint,
    PointGeom,
    Polygon,
    Polyline,
    SpatialIndex,
    SpatialIndexError,
    geo_distance,
    geometry_to_wkt,
    point_in_polygon,
    wkt_to_geometry,
    within_bbox,
)

from conftest import brute_force_within_pure, law_of_cosines_distance, winding_number_contains


def test_geopoint_validation():
    with pytest.raises(GeometryError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(GeometryError):
        GeoPoint(0.0, 181.0)
    with pytest.raises(GeometryError):
        GeoPoint(0.0, 0.0, float("nan"))


def test_distance_identity():
    p = GeoPoint(46.0, 11.0)
    assert geo_distance(p, p) == 0.0


def test_distance_one_degree_longitude_at_equator():
    # frozen from the law-of-cosines oracle: 111194.9266 m
    d = geo_distance(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
    oracle = law_of_cosines_distance(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
    assert abs(d - oracle) < 1.0
    assert abs(d - 111_195.0) < 1.0


def test_distance_small_latitude_step():
    # frozen from the law-of-cosines oracle: 1111.949 m
    d = geo_distance(GeoPoint(46.06, 11.12), GeoPoint(46.07, 11.12))
    oracle = law_of_cosines_distance(GeoPoint(46.06, 11.12), GeoPoint(46.07, 11.12))
    assert abs(d - oracle) < 1.0
    assert abs(d - 1_112.0) < 1.0


def test_distance_symmetry_property(rng):
    for _ in range(500):
        a = GeoPoint(rng.uniform(-89, 89), rng.uniform(-179, 179))
        b = GeoPoint(rng.uniform(-89, 89), rng.uniform(-179, 179))
        assert geo_distance(a, b) == geo_distance(b, a)
        assert geo_distance(a, b) >= 0.0


def test_distance_triangle_inequality(rng):
    for _ in range(300):
        a, b, c = (
            GeoPoint(rng.uniform(-89, 89), rng.uniform(-179, 179)) for _ in range(3)
        )
        assert geo_distance(a, c) <= geo_distance(a, b) + geo_distance(b, c) + 1e-6


def unit_square(lat0=45.0, lon0=11.0, size=1.0):
    return Polygon(
        (
            GeoPoint(lat0, lon0),
            GeoPoint(lat0, lon0 + size),
            GeoPoint(lat0 + size, lon0 + size),
            GeoPoint(lat0 + size, lon0),
            GeoPoint(lat0, lon0),
        )
    )


def test_point_in_polygon_interior():
    poly = unit_square()
    assert point_in_polygon(poly.centroid(), poly)


def test_point_in_polygon_far_outside():
    poly = unit_square()
    assert not point_in_polygon(GeoPoint(45.5, 22.0), poly)


def test_point_in_polygon_vertex_counts_inside():
    poly = unit_square()
    assert point_in_polygon(GeoPoint(45.0, 11.0), poly)


def test_point_in_polygon_edge_counts_inside():
    poly = unit_square()
    assert point_in_polygon(GeoPoint(45.0, 11.5), poly)


def test_degenerate_polygon_rejected():
    collinear = Polygon(
        (
            GeoPoint(45.0, 11.0),
            GeoPoint(45.0, 11.5),
            GeoPoint(45.0, 12.0),
            GeoPoint(45.0, 11.0),
        )
    )
    with pytest.raises(GeometryError):
        point_in_polygon(GeoPoint(45.1, 11.1), collinear)


def test_polygon_ring_must_close():
    with pytest.raises(GeometryError):
        Polygon((GeoPoint(0, 0), GeoPoint(0, 1), GeoPoint(1, 1), GeoPoint(1, 0)))


def test_polyline_needs_two_distinct_points():
    with pytest.raises(GeometryError):
        Polyline((GeoPoint(1, 1), GeoPoint(1, 1)))


def _random_convex_polygon(rng, center_lat, center_lon, radius_deg):
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(rng.randint(3, 9)))
    ring = [
        GeoPoint(center_lat + radius_deg * math.sin(a), center_lon + radius_deg * math.cos(a))
        for a in angles
    ]
    return Polygon(tuple(ring + [ring[0]]))


def test_point_in_polygon_agrees_with_winding_oracle(rng):
    agreements = 0
    for _ in range(1000):
        poly = _random_convex_polygon(rng, rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(0.1, 2.0))
        probe = GeoPoint(
            poly.centroid().lat + rng.uniform(-3, 3), poly.centroid().lon + rng.uniform(-3, 3)
        )
        expected = winding_number_contains(probe, list(poly.vertices))
        assert point_in_polygon(probe, poly) == expected
        agreements += 1
    assert agreements == 1000


def test_bbox_validation_and_contains():
    with pytest.raises(GeometryError):
        BoundingBox(47.0, 45.0, 10.0, 12.0)
    box = BoundingBox(45.0, 47.0, 10.0, 12.0)
    assert within_bbox(GeoPoint(46.0, 11.0), box)
    assert not within_bbox(GeoPoint(48.0, 11.0), box)
    assert within_bbox(GeoPoint(45.0, 11.0), box)  # inclusive edge


def test_index_empty():
    box = BoundingBox(45.0, 47.0, 10.0, 12.0)
    index = SpatialIndex.build([], box)
    assert index.query_within(GeoPoint(46.0, 11.0), 1000.0) == []


def test_index_rejects_point_outside_bbox():
    box = BoundingBox(45.0, 47.0, 10.0, 12.0)
    with pytest.raises(SpatialIndexError, match="stray"):
        SpatialIndex.build([("stray", GeoPoint(50.0, 11.0))], box)


def test_index_self_retrieval_radius_zero(rng):
    box = BoundingBox(45.0, 47.0, 10.0, 12.0)
    entries = [
        (f"e{i}", GeoPoint(rng.uniform(45, 47), rng.uniform(10, 12))) for i in range(1000)
    ]
    index = SpatialIndex.build(entries, box)
    for entity_id, point in entries[::50]:
        hits = index.query_within(point, 0.0)
        assert entity_id in [h[0] for h in hits]


def test_index_single_point_at_8_meters():
    box = BoundingBox(45.9, 46.1, 10.9, 11.1)
    base = GeoPoint(46.0, 11.0)
    # ~8 m north of the probe
    target = GeoPoint(46.0 + 8.0 / 111_194.9266, 11.0)
    index = SpatialIndex.build([("near", target)], box)
    hits = index.query_within(base, 50.0)
    assert len(hits) == 1
    assert hits[0][0] == "near"
    assert abs(hits[0][1] - 8.0) < 0.1


def test_index_orders_by_distance():
    box = BoundingBox(45.9, 46.1, 10.9, 11.1)
    probe = GeoPoint(46.0, 11.0)
    ten = GeoPoint(46.0 + 10.0 / 111_194.9266, 11.0)
    thirty = GeoPoint(46.0 + 30.0 / 111_194.9266, 11.0)
    index = SpatialIndex.build([("b_thirty", thirty), ("a_ten", ten)], box)
    hits = index.query_within(probe, 50.0)
    assert [h[0] for h in hits] == ["a_ten", "b_thirty"]


def test_index_probe_far_from_everything(rng):
    box = BoundingBox(45.0, 47.0, 10.0, 12.0)
    entries = [(f"e{i}", GeoPoint(rng.uniform(45, 46), rng.uniform(10, 11))) for i in range(50)]
    index = SpatialIndex.build(entries, box)
    assert index.query_within(GeoPoint(46.9, 11.9), 50.0) == []


def test_index_matches_brute_force_scan(rng):
    box = BoundingBox(45.95, 46.05, 10.95, 11.05)
    entries = [
        (f"e{i:05d}", GeoPoint(rng.uniform(45.95, 46.05), rng.uniform(10.95, 11.05)))
        for i in range(2000)
    ]
    index = SpatialIndex.build(entries, box)
    for _ in range(200):
        probe = GeoPoint(rng.uniform(45.95, 46.05), rng.uniform(10.95, 11.05))
        radius = rng.choice([25.0, 50.0, 200.0, 1000.0])
        assert index.query_within(probe, radius) == brute_force_within_pure(entries, probe, radius)


def test_index_ties_break_on_id():
    box = BoundingBox(45.9, 46.1, 10.9, 11.1)
    p = GeoPoint(46.0, 11.0)
    index = SpatialIndex.build([("b", p), ("a", p)], box)
    hits = index.query_within(p, 10.0)
    assert [h[0] for h in hits] == ["a", "b"]


def test_wkt_roundtrip():
    geoms = [
        PointGeom(GeoPoint(46.0, 11.0)),
        Polyline((GeoPoint(46.0, 11.0), GeoPoint(46.1, 11.1))),
        unit_square(),
    ]
    for g in geoms:
        parsed = wkt_to_geometry(geometry_to_wkt(g))
        assert type(parsed) is type(g)
        assert geometry_to_wkt(parsed) == geometry_to_wkt(g)


def test_wkt_rejects_garbage():
    with pytest.raises(GeometryError):
        wkt_to_geometry("CIRCLE (1 2)")
