"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the production code paths they check:
radius queries scan every point, clustering uses a stack-based textbook
expansion over full pairwise neighborhoods, and joins are nested loops.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from contextfuse.geo import EARTH_RADIUS_M, GeoPoint, geo_distance

# --- distance oracles -----------------------------------------------------


def law_of_cosines_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Spherical law of cosines; independent of the haversine path."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    arg = math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dl)
    return EARTH_RADIUS_M * math.acos(min(1.0, max(-1.0, arg)))


def brute_force_within(points, probe: GeoPoint, radius_m: float):
    """Scan every point: vectorized coarse bound with a 1 m safety margin,
    exact refine with the scalar distance. Sorted (id, distance) like the
    index contract."""
    if not points:
        return []
    lats = np.radians(np.array([p.lat for _, p in points]))
    lons = np.radians(np.array([p.lon for _, p in points]))
    phi = math.radians(probe.lat)
    lam = math.radians(probe.lon)
    h = np.sin((lats - phi) / 2) ** 2 + math.cos(phi) * np.cos(lats) * np.sin((lons - lam) / 2) ** 2
    coarse = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0, 1)))
    hits = []
    for k in np.nonzero(coarse <= radius_m + 1.0)[0]:
        entity_id, point = points[int(k)]
        d = geo_distance(probe, point)
        if d <= radius_m:
            hits.append((d, entity_id))
    hits.sort()
    return [(entity_id, d) for d, entity_id in hits]


def brute_force_within_pure(points, probe: GeoPoint, radius_m: float):
    """Plain full scan with the scalar distance (small inputs only)."""
    hits = []
    for entity_id, point in points:
        d = geo_distance(probe, point)
        if d <= radius_m:
            hits.append((d, entity_id))
    hits.sort()
    return [(entity_id, d) for d, entity_id in hits]


# --- clustering oracle ----------------------------------------------------


def _pairwise_neighbors(points: list[GeoPoint], eps_m: float) -> list[list[int]]:
    n = len(points)
    if n == 0:
        return []
    lats = np.radians(np.array([p.lat for p in points]))
    lons = np.radians(np.array([p.lon for p in points]))
    h = (
        np.sin((lats[:, None] - lats[None, :]) / 2) ** 2
        + np.cos(lats[:, None]) * np.cos(lats[None, :]) * np.sin((lons[:, None] - lons[None, :]) / 2) ** 2
    )
    coarse = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0, 1)))
    neighbors: list[list[int]] = []
    for i in range(n):
        row = []
        for j in np.nonzero(coarse[i] <= eps_m + 0.5)[0]:
            if geo_distance(points[i], points[int(j)]) <= eps_m:
                row.append(int(j))
        neighbors.append(row)
    return neighbors


def naive_dbscan(points: list[GeoPoint], eps_m: float, min_pts: int):
    """Textbook density clustering over full pairwise neighborhoods,
    depth-first expansion. Returns (clusters, noise) as index lists."""
    n = len(points)
    neighbors = _pairwise_neighbors(points, eps_m)
    labels: dict[int, int] = {}
    clusters: list[list[int]] = []
    for i in range(n):
        if i in labels:
            continue
        if len(neighbors[i]) < min_pts:
            labels[i] = -1
            continue
        cid = len(clusters)
        clusters.append([])
        stack = [i]
        while stack:
            j = stack.pop()
            if labels.get(j) == -1:
                labels[j] = cid
                continue
            if j in labels:
                continue
            labels[j] = cid
            if len(neighbors[j]) >= min_pts:
                stack.extend(neighbors[j])
    out = [[] for _ in clusters]
    noise = []
    for i in range(n):
        if labels[i] == -1:
            noise.append(i)
        else:
            out[labels[i]].append(i)
    return out, noise


# --- polygon oracle -------------------------------------------------------


def winding_number_contains(p: GeoPoint, vertices: list[GeoPoint]) -> bool:
    """Nonzero winding number on the lat/lon plane (x=lon, y=lat)."""

    def is_left(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> float:
        return (b.lon - a.lon) * (c.lat - a.lat) - (c.lon - a.lon) * (b.lat - a.lat)

    wn = 0
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        if a.lat <= p.lat:
            if b.lat > p.lat and is_left(a, b, p) > 0:
                wn += 1
        elif b.lat <= p.lat and is_left(a, b, p) < 0:
            wn -= 1
    return wn != 0


# --- shared fixtures ------------------------------------------------------


@pytest.fixture
def rng():
    import random

    return random.Random(20240509)
