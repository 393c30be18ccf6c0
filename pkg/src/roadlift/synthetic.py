"""Synthetic terrain and road generators for fixtures and demos.

Rasters are generated in the project UTM frame (the coordinate
convention the pipeline expects from real data); road layouts are
emitted as OSM XML whose node coordinates are the inverse projection of
exact UTM placements, so fixture geometry is defined in meters.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from typing import Callable

import numpy as np

from .dem import DemGrid
from .geo import UtmPoint, utm_to_wgs84


def synth_dem(ncols: int, nrows: int, cellsize: float, x0: float, y0: float,
              z_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> DemGrid:
    """Raster with z_fn evaluated on grid-relative node coordinates.

    z_fn receives (X, Y) arrays where X = i * cellsize, Y = j *
    cellsize, i.e. offsets from the grid origin, not absolute UTM.
    """
    x = np.arange(ncols) * cellsize
    y = np.arange(nrows) * cellsize
    X, Y = np.meshgrid(x, y)
    data = np.asarray(z_fn(X, Y), dtype=np.float64)
    return DemGrid(data, x0, y0, cellsize)


def plane_dem(ncols: int, nrows: int, cellsize: float, x0: float, y0: float,
              a: float, b: float, c: float = 0.0,
              offset_xy: tuple[float, float] = (0.0, 0.0)) -> DemGrid:
    """Plane z = a*(X + offset_x) + b*(Y + offset_y) + c over the grid."""
    ox, oy = offset_xy
    return synth_dem(ncols, nrows, cellsize, x0, y0,
                     lambda X, Y: a * (X + ox) + b * (Y + oy) + c)


def sine_dem(ncols: int, nrows: int, cellsize: float, x0: float, y0: float,
             amplitude: float, wavelength: float,
             offset_x: float = 0.0) -> DemGrid:
    """Rolling terrain: z = amplitude * sin(2*pi*(X + offset_x)/wavelength)."""
    return synth_dem(
        ncols, nrows, cellsize, x0, y0,
        lambda X, Y: amplitude * np.sin(2.0 * np.pi * (X + offset_x) / wavelength),
    )


def _osm_document(nodes: dict[str, UtmPoint], ways: list[dict]) -> str:
    """OSM XML from UTM node placements (inverse-projected to WGS84)."""
    root = ET.Element("osm", {"version": "0.6", "generator": "roadlift-synthetic"})
    for nid in sorted(nodes, key=int):
        g = utm_to_wgs84(nodes[nid])
        ET.SubElement(root, "node", {"id": nid, "lat": repr(g.lat), "lon": repr(g.lon)})
    for way in ways:
        el = ET.SubElement(root, "way", {"id": way["id"]})
        for ref in way["refs"]:
            ET.SubElement(el, "nd", {"ref": ref})
        for k, v in way["tags"].items():
            ET.SubElement(el, "tag", {"k": k, "v": str(v)})
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def _bbox_around(nodes: dict[str, UtmPoint], pad_deg: float = 5e-5):
    lats = []
    lons = []
    for p in nodes.values():
        g = utm_to_wgs84(p)
        lats.append(g.lat)
        lons.append(g.lon)
    return (min(lons) - pad_deg, min(lats) - pad_deg,
            max(lons) + pad_deg, max(lats) + pad_deg)


def grid_osm(nx: int, ny: int, spacing: float, origin: UtmPoint,
             highway: str = "residential") -> tuple[str, tuple[float, float, float, float]]:
    """Manhattan grid: nx columns x ny rows of nodes, one way per row
    and per column.  Returns (osm_text, bbox).

    After ingest every interior shared node splits the ways, giving
    ny*(nx-1) + nx*(ny-1) segments; every node is an intersection of
    at least two of them.  Way ids: row j -> 200000 + j, column i ->
    300000 + i; segment ids after split: "<way>#<k>", k west-to-east or
    south-to-north.
    """
    nodes: dict[str, UtmPoint] = {}

    def node_id(i: int, j: int) -> str:
        return str(100000 + j * nx + i)

    for j in range(ny):
        for i in range(nx):
            nodes[node_id(i, j)] = UtmPoint(
                origin.easting + i * spacing, origin.northing + j * spacing,
                origin.zone, origin.hemisphere,
            )

    ways = []
    for j in range(ny):
        ways.append({
            "id": str(200000 + j),
            "refs": [node_id(i, j) for i in range(nx)],
            "tags": {"highway": highway},
        })
    for i in range(nx):
        ways.append({
            "id": str(300000 + i),
            "refs": [node_id(i, j) for j in range(ny)],
            "tags": {"highway": highway},
        })

    return _osm_document(nodes, ways), _bbox_around(nodes)


def ramp_osm(length: float, origin: UtmPoint,
             highway: str = "residential") -> tuple[str, tuple[float, float, float, float]]:
    """One straight west-to-east way of the given length (two nodes).

    The single ingested segment id is "400000#0".
    """
    nodes = {
        "100001": origin,
        "100002": UtmPoint(origin.easting + length, origin.northing,
                           origin.zone, origin.hemisphere),
    }
    ways = [{"id": "400000", "refs": ["100001", "100002"],
             "tags": {"highway": highway}}]
    return _osm_document(nodes, ways), _bbox_around(nodes)


def routes_json(routes: list[tuple[str, list[str], float]]) -> str:
    """Routes document from (vehicle_id, segment ids, speed) triples."""
    doc = [{"vehicle_id": vid, "segments": segs, "speed": speed}
           for vid, segs, speed in routes]
    return json.dumps(doc, indent=2) + "\n"
