"""Road network data model and the versioned artifact format.

A 2D network is nodes plus polyline segments in a local frame.  The 3D
network keeps the same topology and adds, per segment, a station/
elevation profile sampled along the polyline.  Networks serialize to a
single JSON artifact (schema ``road-network-3d/1``) that round-trips
bit-exactly: floats are written with shortest-repr and key order is
fixed, so identical inputs give byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import LocalFrame, UtmPoint

ARTIFACT_SCHEMA = "road-network-3d/1"

DEFAULT_GRADIENT_LIMITS = {
    "highway": 0.08,
    "arterial": 0.12,
    "residential": 0.15,
}

ROAD_CLASS_KINDS = tuple(DEFAULT_GRADIENT_LIMITS)


class NetworkFormatError(ValueError):
    """Artifact JSON that does not satisfy the schema."""


@dataclass(frozen=True)
class RoadClass:
    kind: str
    max_gradient: float

    def __post_init__(self) -> None:
        if self.kind not in ROAD_CLASS_KINDS:
            raise ValueError(f"unknown road class kind {self.kind!r}")
        if not self.max_gradient > 0.0:
            raise ValueError(f"max_gradient must be positive, got {self.max_gradient!r}")


def make_road_class(kind: str, limits: dict[str, float] | None = None) -> RoadClass:
    table = DEFAULT_GRADIENT_LIMITS if limits is None else limits
    if kind not in table:
        raise ValueError(f"no gradient limit configured for road class {kind!r}")
    return RoadClass(kind, float(table[kind]))


@dataclass
class RoadNode:
    """A shared endpoint between segments, local-frame meters."""

    id: str
    x: float
    y: float
    z: float | None = None
    is_intersection: bool = False
    is_signal: bool = False


@dataclass
class RoadSegment2D:
    """A directed polyline between two nodes."""

    id: str
    from_node: str
    to_node: str
    polyline: np.ndarray
    road_class: RoadClass
    lanes: int = 1
    oneway: bool = False

    def __post_init__(self) -> None:
        self.polyline = np.asarray(self.polyline, dtype=np.float64)
        if self.polyline.ndim != 2 or self.polyline.shape[1] != 2 or len(self.polyline) < 2:
            raise ValueError(f"segment {self.id}: polyline must be (M>=2, 2)")
        legs = np.hypot(*np.diff(self.polyline, axis=0).T)
        if not (legs > 0.0).all():
            raise ValueError(f"segment {self.id}: consecutive polyline points must be distinct")
        if self.lanes < 1:
            raise ValueError(f"segment {self.id}: lanes must be >= 1")

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.polyline, axis=0).T).sum())


def polyline_stations(polyline: np.ndarray) -> np.ndarray:
    """Cumulative arclength of each vertex, starting at 0."""
    legs = np.hypot(*np.diff(polyline, axis=0).T)
    return np.concatenate(([0.0], np.cumsum(legs)))


def interpolate_polyline(polyline: np.ndarray, stations: np.ndarray) -> np.ndarray:
    """xy points at the given arclength stations, shape (N, 2).

    Piecewise linear; a station equal to a vertex station returns the
    vertex coordinates exactly.
    """
    cum = polyline_stations(polyline)
    x = np.interp(stations, cum, polyline[:, 0])
    y = np.interp(stations, cum, polyline[:, 1])
    return np.stack([x, y], axis=1)


@dataclass
class RoadNetwork2D:
    nodes: dict[str, RoadNode]
    segments: list[RoadSegment2D]
    frame: LocalFrame
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        ids = [s.id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate segment ids")
        for seg in self.segments:
            for which, node_id, vertex in (
                ("from", seg.from_node, seg.polyline[0]),
                ("to", seg.to_node, seg.polyline[-1]),
            ):
                node = self.nodes.get(node_id)
                if node is None:
                    raise ValueError(f"segment {seg.id}: unknown {which} node {node_id!r}")
                if vertex[0] != node.x or vertex[1] != node.y:
                    raise ValueError(
                        f"segment {seg.id}: polyline {which} endpoint does not "
                        f"coincide with node {node_id}"
                    )

    def segment_by_id(self, segment_id: str) -> RoadSegment2D:
        for seg in self.segments:
            if seg.id == segment_id:
                return seg
        raise KeyError(segment_id)


@dataclass
class ElevationProfile:
    """Elevations at strictly increasing stations along one segment."""

    stations: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        self.stations = np.asarray(self.stations, dtype=np.float64)
        self.z = np.asarray(self.z, dtype=np.float64)
        if self.stations.ndim != 1 or self.stations.shape != self.z.shape:
            raise ValueError("stations and z must be equal-length 1-D arrays")
        if len(self.stations) < 2:
            raise ValueError("profile needs at least 2 samples")
        if self.stations[0] != 0.0:
            raise ValueError("stations must start at 0")
        if not (np.diff(self.stations) > 0.0).all():
            raise ValueError("stations must be strictly increasing")
        if not np.isfinite(self.z).all():
            raise ValueError("elevations must be finite")

    @property
    def length(self) -> float:
        return float(self.stations[-1])

    def gradients(self) -> np.ndarray:
        """Signed grade of each station interval, dz/ds."""
        return np.diff(self.z) / np.diff(self.stations)


@dataclass
class RoadSegment3D:
    """A 2D segment plus its elevation profile.

    ``profile.stations`` always contains the arclengths of every
    original polyline vertex, so each station interval lies inside one
    straight leg and the interval grade equals rise over run.
    """

    id: str
    from_node: str
    to_node: str
    polyline: np.ndarray
    road_class: RoadClass
    lanes: int
    oneway: bool
    profile: ElevationProfile
    flagged: bool = False
    smooth_iterations: int = 0

    def __post_init__(self) -> None:
        self.polyline = np.asarray(self.polyline, dtype=np.float64)

    @property
    def length(self) -> float:
        return self.profile.length

    def points3d(self) -> np.ndarray:
        """(N, 3) xyz at each profile station."""
        xy = interpolate_polyline(self.polyline, self.profile.stations)
        return np.column_stack([xy, self.profile.z])


@dataclass
class RoadNetwork3D:
    nodes: dict[str, RoadNode]
    segments: list[RoadSegment3D]
    frame: LocalFrame
    provenance: dict = field(default_factory=dict)

    def segment_by_id(self, segment_id: str) -> RoadSegment3D:
        for seg in self.segments:
            if seg.id == segment_id:
                return seg
        raise KeyError(segment_id)

    def intersection_nodes(self) -> list[RoadNode]:
        return [n for n in self.nodes.values() if n.is_intersection]

    def to_json_dict(self) -> dict:
        nodes = [
            {
                "id": n.id,
                "x": n.x,
                "y": n.y,
                "z": n.z,
                "intersection": n.is_intersection,
                "signal": n.is_signal,
            }
            for n in sorted(self.nodes.values(), key=lambda n: n.id)
        ]
        segments = [
            {
                "id": s.id,
                "from": s.from_node,
                "to": s.to_node,
                "class": s.road_class.kind,
                "max_gradient": s.road_class.max_gradient,
                "lanes": s.lanes,
                "oneway": s.oneway,
                "polyline": s.polyline.tolist(),
                "stations": s.profile.stations.tolist(),
                "z": s.profile.z.tolist(),
                "flagged": s.flagged,
                "smooth_iterations": s.smooth_iterations,
            }
            for s in sorted(self.segments, key=lambda s: s.id)
        ]
        return {
            "schema": ARTIFACT_SCHEMA,
            "frame": {
                "origin_easting": self.frame.origin.easting,
                "origin_northing": self.frame.origin.northing,
                "zone": self.frame.zone,
                "hemisphere": self.frame.hemisphere,
            },
            "provenance": self.provenance,
            "nodes": nodes,
            "segments": segments,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RoadNetwork3D":
        if not isinstance(doc, dict) or doc.get("schema") != ARTIFACT_SCHEMA:
            raise NetworkFormatError(
                f"expected schema {ARTIFACT_SCHEMA!r}, got {doc.get('schema')!r}"
            )
        try:
            fr = doc["frame"]
            frame = LocalFrame(UtmPoint(
                fr["origin_easting"], fr["origin_northing"], fr["zone"], fr["hemisphere"]
            ))
            nodes = {
                n["id"]: RoadNode(n["id"], n["x"], n["y"], n["z"],
                                  n["intersection"], n["signal"])
                for n in doc["nodes"]
            }
            segments = [
                RoadSegment3D(
                    id=s["id"],
                    from_node=s["from"],
                    to_node=s["to"],
                    polyline=np.asarray(s["polyline"], dtype=np.float64),
                    road_class=RoadClass(s["class"], s["max_gradient"]),
                    lanes=s["lanes"],
                    oneway=s["oneway"],
                    profile=ElevationProfile(
                        np.asarray(s["stations"], dtype=np.float64),
                        np.asarray(s["z"], dtype=np.float64),
                    ),
                    flagged=s["flagged"],
                    smooth_iterations=s["smooth_iterations"],
                )
                for s in doc["segments"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"malformed network artifact: {exc}") from exc
        return cls(nodes, segments, frame, doc.get("provenance", {}))

    @classmethod
    def from_json(cls, text: str) -> "RoadNetwork3D":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"artifact is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "RoadNetwork3D":
        return cls.from_json(Path(path).read_text())
