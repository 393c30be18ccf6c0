"""Serialize a 3D road network for downstream simulators.

Three carriers: GeoJSON (inspection, WGS84), an OpenDRIVE 1.4 subset
(header/road/planView/elevationProfile/lanes/junction), and a plain
SUMO network document with 3D edge shapes.  Output is deterministic:
features and elements are sorted by id and numbers use fixed decimal
formatting, so identical networks give byte-identical documents.

Coordinates are written with 3 fractional digits for meters and 7 for
degrees.  Arclength bookkeeping fields (geometry s / length) keep 9
digits so summed road lengths stay within 1e-6 m of the source.
"""

from __future__ import annotations

import hashlib
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import local_to_wgs84
from .network import RoadNetwork3D, RoadSegment3D

LANE_WIDTH_M = 3.5
SPEED_BY_CLASS = {"highway": 27.8, "arterial": 13.9, "residential": 8.3}

OPENDRIVE_REV_MAJOR = 1
OPENDRIVE_REV_MINOR = 4

FORMATS = ("geojson", "xodr", "netxml")
_FILENAMES = {
    "geojson": "network.geojson",
    "xodr": "network.xodr",
    "netxml": "network.net.xml",
}

MANIFEST_SCHEMA = "export-manifest/1"


class ExportGeometryError(ValueError):
    """Degenerate geometry that cannot be serialized."""


def _fmt_m(value: float) -> str:
    return f"{value:.3f}"


def _fmt_arc(value: float) -> str:
    return f"{value:.9f}"


def _fmt_slope(value: float) -> str:
    out = f"{value:.9f}".rstrip("0")
    return out + "0" if out.endswith(".") else out


def _sorted_segments(net: RoadNetwork3D) -> list[RoadSegment3D]:
    return sorted(net.segments, key=lambda s: s.id)


# ---------------------------------------------------------------- GeoJSON

def export_geojson(net: RoadNetwork3D) -> str:
    """FeatureCollection with one 3D LineString per segment plus node
    Points, coordinates inverse-projected to WGS84 (z stays meters)."""
    features = []
    for seg in _sorted_segments(net):
        coords = []
        for x, y, z in seg.points3d():
            g = local_to_wgs84(x, y, net.frame)
            coords.append([round(g.lon, 7), round(g.lat, 7), round(float(z), 3)])
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {
                "id": seg.id,
                "class": seg.road_class.kind,
                "max_gradient": seg.road_class.max_gradient,
                "lanes": seg.lanes,
                "oneway": seg.oneway,
                "from": seg.from_node,
                "to": seg.to_node,
                "flagged": seg.flagged,
            },
        })
    for node in sorted(net.nodes.values(), key=lambda n: n.id):
        g = local_to_wgs84(node.x, node.y, net.frame)
        z = 0.0 if node.z is None else float(node.z)
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [round(g.lon, 7), round(g.lat, 7), round(z, 3)],
            },
            "properties": {
                "id": node.id,
                "is_intersection": node.is_intersection,
                "is_signal": node.is_signal,
            },
        })
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, indent=2) + "\n"


# --------------------------------------------------------------- OpenDRIVE

def _elevation_records(seg: RoadSegment3D) -> list[tuple[float, float, float]]:
    """Piecewise-linear (s, a, b) records; consecutive samples on the
    same line are coalesced into one record."""
    s = seg.profile.stations
    z = seg.profile.z
    if len(s) == 2 and s[0] == s[1]:
        raise ExportGeometryError(f"segment {seg.id}: zero-length elevation profile")
    records: list[tuple[float, float, float]] = []
    for i in range(len(s) - 1):
        b = (z[i + 1] - z[i]) / (s[i + 1] - s[i])
        if records:
            s0, a0, b0 = records[-1]
            # Extend the previous record if this sample continues its line.
            if abs(b - b0) < 1e-12 and abs(z[i] - (a0 + b0 * (s[i] - s0))) < 1e-9:
                continue
        records.append((float(s[i]), float(z[i]), float(b)))
    return records


def export_opendrive(net: RoadNetwork3D) -> str:
    """OpenDRIVE 1.4 subset: line-primitive planView per polyline leg,
    piecewise-linear elevation, fixed 3.5 m lanes, junctions at
    intersection nodes."""
    segments = _sorted_segments(net)
    intersections = {n.id for n in net.intersection_nodes()}

    xs: list[float] = []
    ys: list[float] = []
    for seg in segments:
        xs.extend(seg.polyline[:, 0])
        ys.extend(seg.polyline[:, 1])

    root = ET.Element("OpenDRIVE")
    header = ET.SubElement(root, "header", {
        "revMajor": str(OPENDRIVE_REV_MAJOR),
        "revMinor": str(OPENDRIVE_REV_MINOR),
        "name": "",
        "version": "1.00",
    })
    if xs:
        header.set("north", _fmt_m(max(ys)))
        header.set("south", _fmt_m(min(ys)))
        header.set("east", _fmt_m(max(xs)))
        header.set("west", _fmt_m(min(xs)))

    incident: dict[str, list[RoadSegment3D]] = {}
    for seg in segments:
        incident.setdefault(seg.from_node, []).append(seg)
        incident.setdefault(seg.to_node, []).append(seg)

    for seg in segments:
        length = seg.profile.length
        road = ET.SubElement(root, "road", {
            "name": seg.id,
            "length": _fmt_arc(length),
            "id": seg.id,
            "junction": "-1",
        })
        link = ET.Element("link")
        if seg.from_node in intersections:
            ET.SubElement(link, "predecessor", {
                "elementType": "junction", "elementId": f"j:{seg.from_node}",
            })
        if seg.to_node in intersections:
            ET.SubElement(link, "successor", {
                "elementType": "junction", "elementId": f"j:{seg.to_node}",
            })
        if len(link):
            road.append(link)

        plan = ET.SubElement(road, "planView")
        legs = np.diff(seg.polyline, axis=0)
        leg_len = np.hypot(legs[:, 0], legs[:, 1])
        s = 0.0
        for i, (dx, dy) in enumerate(legs):
            if leg_len[i] <= 0.0:
                raise ExportGeometryError(
                    f"segment {seg.id}: zero-length planView primitive at leg {i}"
                )
            geom = ET.SubElement(plan, "geometry", {
                "s": _fmt_arc(s),
                "x": _fmt_m(float(seg.polyline[i, 0])),
                "y": _fmt_m(float(seg.polyline[i, 1])),
                "hdg": _fmt_slope(math.atan2(float(dy), float(dx))),
                "length": _fmt_arc(float(leg_len[i])),
            })
            ET.SubElement(geom, "line")
            s += float(leg_len[i])

        elev = ET.SubElement(road, "elevationProfile")
        for es, ea, eb in _elevation_records(seg):
            ET.SubElement(elev, "elevation", {
                "s": _fmt_arc(es),
                "a": _fmt_m(ea),
                "b": _fmt_slope(eb),
                "c": "0",
                "d": "0",
            })

        lanes = ET.SubElement(road, "lanes")
        section = ET.SubElement(lanes, "laneSection", {"s": "0"})
        if not seg.oneway:
            left = ET.SubElement(section, "left")
            for k in range(seg.lanes, 0, -1):
                lane = ET.SubElement(left, "lane", {
                    "id": str(k), "type": "driving", "level": "false",
                })
                ET.SubElement(lane, "width", {
                    "sOffset": "0", "a": _fmt_m(LANE_WIDTH_M), "b": "0", "c": "0", "d": "0",
                })
        center = ET.SubElement(section, "center")
        ET.SubElement(center, "lane", {"id": "0", "type": "none", "level": "false"})
        right = ET.SubElement(section, "right")
        for k in range(1, seg.lanes + 1):
            lane = ET.SubElement(right, "lane", {
                "id": str(-k), "type": "driving", "level": "false",
            })
            ET.SubElement(lane, "width", {
                "sOffset": "0", "a": _fmt_m(LANE_WIDTH_M), "b": "0", "c": "0", "d": "0",
            })

    for nid in sorted(intersections):
        junction = ET.SubElement(root, "junction", {"id": f"j:{nid}", "name": nid})
        conn = 0
        roads_here = sorted(incident.get(nid, []), key=lambda s: s.id)
        for a in roads_here:
            for b in roads_here:
                if a.id == b.id:
                    continue
                contact = "start" if b.from_node == nid else "end"
                ET.SubElement(junction, "connection", {
                    "id": str(conn),
                    "incomingRoad": a.id,
                    "connectingRoad": b.id,
                    "contactPoint": contact,
                })
                conn += 1

    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def validate_opendrive_subset(text: str) -> list[str]:
    """Structural check of the OpenDRIVE subset this package writes.

    Returns a list of problems; an empty list means the document
    satisfies the subset.
    """
    problems: list[str] = []
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]
    if root.tag != "OpenDRIVE":
        return [f"root element is {root.tag!r}, expected 'OpenDRIVE'"]

    header = root.find("header")
    if header is None:
        problems.append("missing header")
    else:
        if header.get("revMajor") != str(OPENDRIVE_REV_MAJOR):
            problems.append(f"header revMajor {header.get('revMajor')!r} != '1'")
        if header.get("revMinor") != str(OPENDRIVE_REV_MINOR):
            problems.append(f"header revMinor {header.get('revMinor')!r} != '4'")

    road_ids = set()
    junction_ids = {j.get("id") for j in root.findall("junction")}
    for road in root.findall("road"):
        rid = road.get("id")
        if rid is None:
            problems.append("road without id")
            continue
        if rid in road_ids:
            problems.append(f"duplicate road id {rid!r}")
        road_ids.add(rid)
        try:
            length = float(road.get("length", ""))
        except ValueError:
            problems.append(f"road {rid}: missing/bad length")
            continue
        if not length > 0.0:
            problems.append(f"road {rid}: non-positive length")
        if road.get("junction") is None:
            problems.append(f"road {rid}: missing junction attribute")

        plan = road.find("planView")
        if plan is None or not plan.findall("geometry"):
            problems.append(f"road {rid}: missing planView geometry")
        else:
            s_expected = 0.0
            total = 0.0
            for i, geom in enumerate(plan.findall("geometry")):
                for attr in ("s", "x", "y", "hdg", "length"):
                    if geom.get(attr) is None:
                        problems.append(f"road {rid}: geometry {i} missing {attr!r}")
                if geom.find("line") is None:
                    problems.append(f"road {rid}: geometry {i} is not a line primitive")
                try:
                    s_val = float(geom.get("s", "nan"))
                    g_len = float(geom.get("length", "nan"))
                except ValueError:
                    continue
                if abs(s_val - s_expected) > 1e-6:
                    problems.append(
                        f"road {rid}: geometry {i} s={s_val} does not chain "
                        f"(expected {s_expected})"
                    )
                if not g_len > 0.0:
                    problems.append(f"road {rid}: geometry {i} non-positive length")
                s_expected = s_val + g_len
                total = s_expected
            if abs(total - length) > 1e-6:
                problems.append(
                    f"road {rid}: planView total {total} != road length {length}"
                )

        elev = road.find("elevationProfile")
        if elev is None or not elev.findall("elevation"):
            problems.append(f"road {rid}: missing elevationProfile")
        else:
            prev_s = -1.0
            for i, rec in enumerate(elev.findall("elevation")):
                missing = [a for a in ("s", "a", "b", "c", "d") if rec.get(a) is None]
                if missing:
                    problems.append(f"road {rid}: elevation {i} missing {missing}")
                    continue
                try:
                    s_val = float(rec.get("s"))
                    c_val = float(rec.get("c"))
                    d_val = float(rec.get("d"))
                    float(rec.get("a"))
                    float(rec.get("b"))
                except ValueError:
                    problems.append(f"road {rid}: elevation {i} has non-numeric fields")
                    continue
                if i == 0 and s_val != 0.0:
                    problems.append(f"road {rid}: first elevation record s != 0")
                if s_val <= prev_s:
                    problems.append(f"road {rid}: elevation s not strictly increasing")
                prev_s = s_val
                if c_val != 0.0 or d_val != 0.0:
                    problems.append(f"road {rid}: elevation {i} not piecewise-linear")

        lanes = road.find("lanes")
        section = lanes.find("laneSection") if lanes is not None else None
        if section is None:
            problems.append(f"road {rid}: missing lanes/laneSection")
        else:
            center = section.find("center/lane")
            if center is None or center.get("id") != "0" or center.get("type") != "none":
                problems.append(f"road {rid}: missing center lane 0 of type none")
            right_lanes = section.findall("right/lane")
            if not right_lanes:
                problems.append(f"road {rid}: no right lanes")
            for lane in right_lanes + section.findall("left/lane"):
                width = lane.find("width")
                if width is None or float(width.get("a", "nan")) != LANE_WIDTH_M:
                    problems.append(
                        f"road {rid}: lane {lane.get('id')} width != {LANE_WIDTH_M}"
                    )

        link = road.find("link")
        if link is not None:
            for ref in list(link):
                if ref.get("elementType") == "junction" and \
                        ref.get("elementId") not in junction_ids:
                    problems.append(
                        f"road {rid}: link references unknown junction "
                        f"{ref.get('elementId')!r}"
                    )

    for junction in root.findall("junction"):
        jid = junction.get("id")
        conns = junction.findall("connection")
        if not conns:
            problems.append(f"junction {jid}: no connections")
        for conn in conns:
            for attr in ("id", "incomingRoad", "connectingRoad", "contactPoint"):
                if conn.get(attr) is None:
                    problems.append(f"junction {jid}: connection missing {attr!r}")
            for attr in ("incomingRoad", "connectingRoad"):
                ref = conn.get(attr)
                if ref is not None and ref not in road_ids:
                    problems.append(f"junction {jid}: unknown road {ref!r}")
            if conn.get("contactPoint") not in ("start", "end"):
                problems.append(f"junction {jid}: bad contactPoint")

    return problems


# ------------------------------------------------------------------- SUMO

def export_sumo_net(net: RoadNetwork3D) -> str:
    """Plain SUMO network: 3D nodes and edges with 3D shapes.

    Two-way segments produce a forward and a reversed edge (ids id and
    -id); speed comes from the road class.
    """
    root = ET.Element("net", {"version": "1.6"})
    for node in sorted(net.nodes.values(), key=lambda n: n.id):
        z = 0.0 if node.z is None else float(node.z)
        ET.SubElement(root, "node", {
            "id": node.id,
            "x": _fmt_m(node.x),
            "y": _fmt_m(node.y),
            "z": _fmt_m(z),
            "type": "traffic_light" if node.is_signal else "priority",
        })

    edges = []
    for seg in _sorted_segments(net):
        pts = seg.points3d()
        if len(pts) < 2:
            raise ExportGeometryError(f"segment {seg.id}: degenerate edge shape")
        shape = " ".join(
            f"{_fmt_m(float(x))},{_fmt_m(float(y))},{_fmt_m(float(z))}"
            for x, y, z in pts
        )
        rshape = " ".join(
            f"{_fmt_m(float(x))},{_fmt_m(float(y))},{_fmt_m(float(z))}"
            for x, y, z in pts[::-1]
        )
        speed = SPEED_BY_CLASS[seg.road_class.kind]
        edges.append((seg.id, seg.from_node, seg.to_node, shape, seg.lanes, speed))
        if not seg.oneway:
            edges.append((f"-{seg.id}", seg.to_node, seg.from_node, rshape,
                          seg.lanes, speed))

    for eid, from_n, to_n, shape, lanes, speed in sorted(edges, key=lambda e: e[0]):
        ET.SubElement(root, "edge", {
            "id": eid,
            "from": from_n,
            "to": to_n,
            "numLanes": str(lanes),
            "speed": _fmt_slope(speed),
            "shape": shape,
        })

    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


# --------------------------------------------------------------- manifest

@dataclass
class ExportManifest:
    files: list[dict]
    network_sha256: str

    def to_json(self) -> str:
        doc = {
            "schema": MANIFEST_SCHEMA,
            "network_sha256": self.network_sha256,
            "files": self.files,
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExportManifest":
        doc = json.loads(text)
        if doc.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"expected schema {MANIFEST_SCHEMA!r}")
        return cls(files=doc["files"], network_sha256=doc["network_sha256"])


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def export_all(net: RoadNetwork3D, out_dir: str | Path,
               formats: tuple[str, ...] = FORMATS) -> ExportManifest:
    """Write the requested formats plus export_manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    writers = {
        "geojson": export_geojson,
        "xodr": export_opendrive,
        "netxml": export_sumo_net,
    }
    unknown = [f for f in formats if f not in writers]
    if unknown:
        raise ValueError(f"unknown export format(s) {unknown}; expected {FORMATS}")

    files = []
    for fmt in formats:
        text = writers[fmt](net)
        path = out / _FILENAMES[fmt]
        path.write_text(text)
        if path.stat().st_size == 0:
            raise RuntimeError(f"export produced empty file {path}")
        files.append({
            "path": _FILENAMES[fmt],
            "format": fmt,
            "sha256": _sha256(text.encode()),
            "bytes": len(text.encode()),
        })

    manifest = ExportManifest(files=files, network_sha256=_sha256(net.to_json().encode()))
    (out / "export_manifest.json").write_text(manifest.to_json())
    return manifest
