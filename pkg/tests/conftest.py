"""Shared fixtures and small network/grid factories used across the suite."""
from __future__ import annotations

import numpy as np
import pytest

from roadlift.dem import DemGrid
from roadlift.geo import LocalFrame, UtmPoint
from roadlift.network import (
    ElevationProfile,
    RoadNetwork2D,
    RoadNetwork3D,
    RoadNode,
    RoadSegment2D,
    RoadSegment3D,
    make_road_class,
)

# Any valid frame works for hand-built local-coordinate networks.
FRAME = LocalFrame(UtmPoint(500000.0, 4000000.0, 10, "north"))


def make_node(nid, x, y, z=None, intersection=False, signal=False):
    return RoadNode(id=nid, x=x, y=y, z=z, is_intersection=intersection, is_signal=signal)


def make_seg2d(sid, from_node, to_node, points, kind="residential", lanes=1, oneway=False):
    return RoadSegment2D(
        id=sid,
        from_node=from_node,
        to_node=to_node,
        polyline=np.asarray(points, dtype=float),
        road_class=make_road_class(kind),
        lanes=lanes,
        oneway=oneway,
    )


def make_net2d(nodes, segments, bbox=None):
    return RoadNetwork2D(
        nodes={n.id: n for n in nodes},
        segments=list(segments),
        frame=FRAME,
        bbox=bbox,
    )


def make_seg3d(sid, from_node, to_node, points, stations, z, kind="residential",
               lanes=1, oneway=False, flagged=False, smooth_iterations=0):
    return RoadSegment3D(
        id=sid,
        from_node=from_node,
        to_node=to_node,
        polyline=np.asarray(points, dtype=float),
        road_class=make_road_class(kind),
        lanes=lanes,
        oneway=oneway,
        profile=ElevationProfile(np.asarray(stations, dtype=float), np.asarray(z, dtype=float)),
        flagged=flagged,
        smooth_iterations=smooth_iterations,
    )


def make_net3d(nodes, segments, provenance=None):
    return RoadNetwork3D(
        nodes={n.id: n for n in nodes},
        segments=list(segments),
        frame=FRAME,
        provenance=dict(provenance or {"sampling_mode": "idw4"}),
    )


def straight_seg3d(sid="s0", a="n0", b="n1", length=100.0, z0=0.0, z1=0.0,
                   n=None, kind="residential", y=0.0, **kw):
    """Straight segment along +x with a linear profile, 1 m stations by default."""
    if n is None:
        n = int(length)
    stations = np.linspace(0.0, length, n + 1)
    z = z0 + (z1 - z0) * stations / length
    points = [(0.0, y), (length, y)]
    return make_seg3d(sid, a, b, points, stations, z, kind=kind, **kw)


def flat_grid(value=0.0, n=8, cellsize=10.0, x0=0.0, y0=0.0):
    return DemGrid(np.full((n, n), float(value)), x0, y0, cellsize)


@pytest.fixture
def plane_grid():
    """80 x 80 nodes at 1 m pitch, z = 0.02 x + 0.01 y + 5 over node coordinates."""
    xs = np.arange(80) * 1.0
    X, Y = np.meshgrid(xs, xs)
    return DemGrid(0.02 * X + 0.01 * Y + 5.0, 0.0, 0.0, 1.0)


@pytest.fixture
def tiny_net2d():
    """Two collinear segments joined at a shared intersection node."""
    nodes = [
        make_node("a", 0.0, 0.0),
        make_node("b", 30.0, 0.0, intersection=True),
        make_node("c", 60.0, 0.0),
    ]
    segs = [
        make_seg2d("w#0", "a", "b", [(0.0, 0.0), (30.0, 0.0)]),
        make_seg2d("w#1", "b", "c", [(30.0, 0.0), (60.0, 0.0)]),
    ]
    return make_net2d(nodes, segs)
