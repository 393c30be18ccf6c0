"""OSM XML ingestion: drivable ways inside a bounding box become a 2D network.

Ways are filtered to drivable highway values, clipped to the bbox by
dropping out-of-bounds vertices (no edge interpolation; each maximal
in-bounds run of at least two vertices survives), projected into the
local frame, and split wherever a node is shared so segments meet only
at endpoints.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .geo import GeoPointWgs, LocalFrame, to_local, utm_zone, wgs84_to_utm
from .network import RoadNetwork2D, RoadNode, RoadSegment2D, make_road_class

log = logging.getLogger(__name__)

# OSM highway values mapped onto the three gradient classes.
CLASS_BY_HIGHWAY = {
    "motorway": "highway",
    "trunk": "highway",
    "motorway_link": "highway",
    "trunk_link": "highway",
    "primary": "arterial",
    "secondary": "arterial",
    "tertiary": "arterial",
    "primary_link": "arterial",
    "secondary_link": "arterial",
    "tertiary_link": "arterial",
    "residential": "residential",
    "unclassified": "residential",
    "living_street": "residential",
    "service": "residential",
}

# Highway values that never carry cars; anything else unknown is kept
# as residential with a warning.
NON_DRIVABLE = frozenset({
    "footway", "cycleway", "path", "pedestrian", "steps", "bridleway",
    "corridor", "elevator", "escalator", "platform", "proposed",
    "construction", "abandoned", "razed",
})

DEFAULT_LANES = {"highway": 2, "arterial": 2, "residential": 1}


class OsmFormatError(ValueError):
    """Malformed OSM XML or broken node references."""


class EmptyNetworkError(ValueError):
    """No drivable way survived the bbox filter."""


def frame_for_bbox(bbox: tuple[float, float, float, float]) -> LocalFrame:
    """Project frame for a WGS84 bbox (min_lon, min_lat, max_lon, max_lat).

    The frame origin is the projected southwest corner, in the UTM zone
    of the bbox center.  Every ingest of the same bbox uses this frame,
    which is what lets rasters and networks share local coordinates.
    """
    min_lon, min_lat, max_lon, max_lat = bbox
    if not (min_lon < max_lon and min_lat < max_lat):
        raise ValueError(f"degenerate bbox {bbox!r}")
    zone = utm_zone((min_lon + max_lon) / 2.0)
    return LocalFrame(wgs84_to_utm(GeoPointWgs(min_lat, min_lon), zone=zone))


def classify(highway_tag: str, limits: dict[str, float] | None = None):
    """Map an OSM highway value to a road class.

    Unknown drivable values fall back to residential with a warning;
    non-drivable values return None.
    """
    if not highway_tag:
        raise ValueError("empty highway tag")
    if highway_tag in NON_DRIVABLE:
        return None
    kind = CLASS_BY_HIGHWAY.get(highway_tag)
    if kind is None:
        log.warning("unknown drivable highway value %r, treating as residential", highway_tag)
        kind = "residential"
    return make_road_class(kind, limits)


def _tags(elem: ET.Element) -> dict[str, str]:
    return {t.get("k"): t.get("v") for t in elem.findall("tag")}


def _parse_lanes(value: str | None, kind: str, way_id: str) -> int:
    if value is None:
        return DEFAULT_LANES[kind]
    try:
        lanes = int(value)
    except ValueError:
        log.warning("way %s: unparseable lanes value %r, using class default", way_id, value)
        return DEFAULT_LANES[kind]
    if lanes < 1:
        log.warning("way %s: lanes %d < 1, using class default", way_id, lanes)
        return DEFAULT_LANES[kind]
    return lanes


def parse_osm(
    text: str,
    bbox: tuple[float, float, float, float],
    gradient_limits: dict[str, float] | None = None,
) -> RoadNetwork2D:
    """Parse OSM XML into a 2D road network.

    bbox is (min_lon, min_lat, max_lon, max_lat) in WGS84 degrees.  The
    local frame origin is the projection of the bbox southwest corner,
    in the UTM zone of the bbox center.
    """
    min_lon, min_lat, max_lon, max_lat = bbox
    frame = frame_for_bbox(bbox)
    zone = frame.zone

    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise OsmFormatError(f"malformed OSM XML: {exc}") from exc

    node_geo: dict[str, GeoPointWgs] = {}
    node_signal: dict[str, bool] = {}
    for el in root.iter("node"):
        nid = el.get("id")
        lat = float(el.get("lat"))
        lon = float(el.get("lon"))
        node_geo[nid] = GeoPointWgs(lat, lon)
        node_signal[nid] = _tags(el).get("highway") == "traffic_signals"

    # Retained way pieces after the drivable filter and bbox clip:
    # (way_id, piece_index, node id run, road_class, lanes, oneway).
    pieces = []
    for el in root.iter("way"):
        way_id = el.get("id")
        tags = _tags(el)
        highway = tags.get("highway")
        if highway is None:
            continue
        road_class = classify(highway, gradient_limits)
        if road_class is None:
            continue

        refs = [nd.get("ref") for nd in el.findall("nd")]
        missing = [r for r in refs if r not in node_geo]
        if missing:
            raise OsmFormatError(
                f"way {way_id} references missing node(s) {', '.join(missing)}"
            )

        lanes = _parse_lanes(tags.get("lanes"), road_class.kind, way_id)
        oneway_tag = tags.get("oneway", "no")
        oneway = oneway_tag in ("yes", "true", "1", "-1")

        def in_bounds(ref: str) -> bool:
            g = node_geo[ref]
            return min_lon <= g.lon <= max_lon and min_lat <= g.lat <= max_lat

        run: list[str] = []
        runs: list[list[str]] = []
        for ref in refs:
            if in_bounds(ref):
                run.append(ref)
            elif run:
                runs.append(run)
                run = []
        if run:
            runs.append(run)

        for run in runs:
            if len(run) < 2:
                continue
            if oneway_tag == "-1":
                run = run[::-1]
            pieces.append((way_id, run, road_class, lanes, oneway))

    if not pieces:
        raise EmptyNetworkError("no drivable ways inside the bounding box")

    # A node referenced more than once across retained pieces is a
    # split point and, once split, an intersection.
    use_count: dict[str, int] = {}
    for _, run, *_ in pieces:
        for ref in run:
            use_count[ref] = use_count.get(ref, 0) + 1

    local_xy = {
        ref: to_local(wgs84_to_utm(node_geo[ref], zone=zone), frame)
        for ref in use_count
    }

    nodes: dict[str, RoadNode] = {}
    segments: list[RoadSegment2D] = []
    endpoint_uses: dict[str, int] = {}

    def ensure_node(ref: str) -> RoadNode:
        node = nodes.get(ref)
        if node is None:
            x, y = local_xy[ref]
            node = RoadNode(ref, x, y, is_signal=node_signal.get(ref, False))
            nodes[ref] = node
        return node

    piece_counter: dict[str, int] = {}
    for way_id, run, road_class, lanes, oneway in pieces:
        cut_at = [0]
        for i in range(1, len(run) - 1):
            if use_count[run[i]] > 1:
                cut_at.append(i)
        cut_at.append(len(run) - 1)

        for a, b in zip(cut_at, cut_at[1:]):
            part = run[a:b + 1]
            if len(part) < 2:
                continue
            if part[0] == part[-1] and len(part) < 3:
                continue  # degenerate self-loop
            k = piece_counter.get(way_id, 0)
            piece_counter[way_id] = k + 1
            polyline = np.array([local_xy[r] for r in part], dtype=np.float64)
            seg = RoadSegment2D(
                id=f"{way_id}#{k}",
                from_node=part[0],
                to_node=part[-1],
                polyline=polyline,
                road_class=road_class,
                lanes=lanes,
                oneway=oneway,
            )
            ensure_node(part[0])
            ensure_node(part[-1])
            endpoint_uses[part[0]] = endpoint_uses.get(part[0], 0) + 1
            endpoint_uses[part[-1]] = endpoint_uses.get(part[-1], 0) + 1
            segments.append(seg)

    if not segments:
        raise EmptyNetworkError("no drivable ways inside the bounding box")

    for ref, node in nodes.items():
        node.is_intersection = endpoint_uses.get(ref, 0) >= 2

    corners = [
        to_local(wgs84_to_utm(GeoPointWgs(lat, lon), zone=zone), frame)
        for lat in (min_lat, max_lat) for lon in (min_lon, max_lon)
    ]
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    bbox_m = (min(xs), min(ys), max(xs), max(ys))

    return RoadNetwork2D(nodes, segments, frame, bbox_m)


def load_osm(path, bbox, gradient_limits=None) -> RoadNetwork2D:
    return parse_osm(Path(path).read_text(), bbox, gradient_limits)
