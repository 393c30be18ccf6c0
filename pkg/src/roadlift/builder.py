"""Fuse a 2D road network with an elevation raster into a 3D network.

Pipeline order: stack elevations onto existing vertices, resample each
segment to roughly 1 m stations, smooth profiles until every station
interval respects the class gradient limit, then reconcile elevations
at intersections and locally re-smooth anything that reopened.

Because original polyline vertices are always retained as stations,
every station interval lies inside one straight leg, so the grade of an
interval is exactly rise over horizontal run.
"""

from __future__ import annotations

import numpy as np

from .dem import DemGrid, NodataStencilError, OutsideExtentError, sample_many
from .geo import Point3D
from .network import (
    ElevationProfile,
    RoadNetwork2D,
    RoadNetwork3D,
    RoadSegment3D,
    interpolate_polyline,
    polyline_stations,
)

RESAMPLE_SPACING = 1.0
DEFAULT_MAX_SMOOTH_ITERS = 1000

# A resampled station this close (meters) to an existing vertex station
# is dropped instead of creating a sliver interval.
_STATION_MERGE_TOL = 1e-9

_MIN_HORIZONTAL_RUN = 1e-9


class StackingError(ValueError):
    """Network points that cannot be sampled from the raster."""


class DegenerateSegmentError(ValueError):
    """Gradient requested over a near-zero horizontal run."""


class SmoothingError(ValueError):
    """Profile could not be brought under its gradient limit."""

    def __init__(self, message: str, iterations: int, worst_station: float,
                 worst_gradient: float):
        super().__init__(message)
        self.iterations = iterations
        self.worst_station = worst_station
        self.worst_gradient = worst_gradient


def gradient(p_start: Point3D, p_end: Point3D) -> float:
    """Signed grade between two points: rise over horizontal run."""
    run = np.hypot(p_end.x - p_start.x, p_end.y - p_start.y)
    if run < _MIN_HORIZONTAL_RUN:
        raise DegenerateSegmentError(
            f"horizontal run {run!r} m below {_MIN_HORIZONTAL_RUN} m"
        )
    return (p_end.z - p_start.z) / run


def stack(net: RoadNetwork2D, grid: DemGrid, mode: str = "idw4") -> RoadNetwork3D:
    """Assign an elevation to every node and polyline vertex.

    Topology and all xy coordinates are untouched.  Points outside the
    raster (or over nodata stencils) abort with a message carrying the
    offender count and ids.
    """
    offenders: list[str] = []

    def sample_or_collect(names: list[str], xy: np.ndarray) -> np.ndarray:
        try:
            return sample_many(grid, xy, mode)
        except (OutsideExtentError, NodataStencilError):
            # Re-run point-wise to attribute every offender.
            z = np.empty(len(xy))
            for i, (x, y) in enumerate(xy):
                try:
                    z[i] = sample_many(grid, np.array([[x, y]]), mode)[0]
                except (OutsideExtentError, NodataStencilError):
                    offenders.append(names[i])
                    z[i] = np.nan
            return z

    segments3d: list[RoadSegment3D] = []
    for seg in net.segments:
        names = [f"segment {seg.id} vertex {i}" for i in range(len(seg.polyline))]
        z = sample_or_collect(names, seg.polyline)
        stations = polyline_stations(seg.polyline)
        if not np.isnan(z).any():
            segments3d.append(RoadSegment3D(
                id=seg.id,
                from_node=seg.from_node,
                to_node=seg.to_node,
                polyline=seg.polyline,
                road_class=seg.road_class,
                lanes=seg.lanes,
                oneway=seg.oneway,
                profile=ElevationProfile(stations, z),
            ))

    node_ids = sorted(net.nodes)
    node_xy = np.array([[net.nodes[i].x, net.nodes[i].y] for i in node_ids])
    node_z = sample_or_collect([f"node {nid}" for nid in node_ids], node_xy)

    if offenders:
        shown = ", ".join(offenders[:20])
        more = "" if len(offenders) <= 20 else f" (+{len(offenders) - 20} more)"
        raise StackingError(
            f"{len(offenders)} network point(s) not sampleable from the raster: "
            f"{shown}{more}"
        )

    nodes = {}
    for i, nid in enumerate(node_ids):
        src = net.nodes[nid]
        nodes[nid] = type(src)(src.id, src.x, src.y, float(node_z[i]),
                               src.is_intersection, src.is_signal)

    return RoadNetwork3D(nodes, segments3d, net.frame, provenance={})


def resample_segment(seg: RoadSegment3D, grid: DemGrid, mode: str = "idw4") -> RoadSegment3D:
    """Insert uniformly spaced interior stations at roughly 1 m.

    n = floor(L / 1 m); interior stations sit at k * (L / n) for
    k = 1..n-1, xy linearly interpolated along the polyline, z sampled
    from the raster.  Original vertices are always retained; an interior
    station colliding with a vertex station is dropped.
    """
    length = seg.profile.length
    if length <= 0.0:
        raise ValueError(f"segment {seg.id}: zero-length segment")

    n = int(np.floor(length / RESAMPLE_SPACING))
    vertex_stations = seg.profile.stations
    if n >= 2:
        interior = np.arange(1, n) * (length / n)
        near_vertex = np.abs(interior[:, None] - vertex_stations[None, :]).min(axis=1)
        interior = interior[near_vertex > _STATION_MERGE_TOL]
    else:
        interior = np.empty(0)

    if len(interior) == 0:
        return seg

    xy = interpolate_polyline(seg.polyline, interior)
    z_new = sample_many(grid, xy, mode)

    stations = np.concatenate([vertex_stations, interior])
    z = np.concatenate([seg.profile.z, z_new])
    order = np.argsort(stations, kind="stable")

    return RoadSegment3D(
        id=seg.id,
        from_node=seg.from_node,
        to_node=seg.to_node,
        polyline=seg.polyline,
        road_class=seg.road_class,
        lanes=seg.lanes,
        oneway=seg.oneway,
        profile=ElevationProfile(stations[order], z[order]),
        flagged=seg.flagged,
        smooth_iterations=seg.smooth_iterations,
    )


def resample_network(net: RoadNetwork3D, grid: DemGrid, mode: str = "idw4") -> RoadNetwork3D:
    net.segments = [resample_segment(s, grid, mode) for s in net.segments]
    return net


def _smooth_arrays(stations: np.ndarray, z: np.ndarray, limit: float,
                   max_iters: int) -> tuple[np.ndarray, int, bool]:
    """Iterated three-point moving average, endpoints pinned.

    Returns (z, iterations_used, converged).  Stops early at a fixed
    point: once an iteration changes nothing, more never will.
    """
    ds = np.diff(stations)
    z = z.copy()
    if (np.abs(np.diff(z) / ds) <= limit).all():
        return z, 0, True
    for it in range(1, max_iters + 1):
        if len(z) > 2:
            nxt = z.copy()
            nxt[1:-1] = (z[:-2] + z[1:-1] + z[2:]) / 3.0
        else:
            nxt = z
        stalled = np.array_equal(nxt, z)
        z = nxt
        if (np.abs(np.diff(z) / ds) <= limit).all():
            return z, it, True
        if stalled:
            return z, it, False
    return z, max_iters, False


def _worst_interval(stations: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    grades = np.diff(z) / np.diff(stations)
    k = int(np.argmax(np.abs(grades)))
    return float(stations[k]), float(grades[k])


def smooth_profile(profile: ElevationProfile, limit: float,
                   max_iters: int = DEFAULT_MAX_SMOOTH_ITERS) -> tuple[ElevationProfile, int]:
    """Smooth until every station interval satisfies |grade| <= limit.

    Already-compliant profiles return unchanged with 0 iterations.
    Non-convergence raises SmoothingError naming the worst station.
    """
    if not limit > 0.0:
        raise ValueError(f"limit must be positive, got {limit!r}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters!r}")
    z, iters, converged = _smooth_arrays(profile.stations, profile.z, limit, max_iters)
    if not converged:
        station, grade = _worst_interval(profile.stations, z)
        raise SmoothingError(
            f"gradient limit {limit} not reached after {iters} iterations; "
            f"worst interval starts at station {station:.3f} m with grade {grade:.6f}",
            iterations=iters, worst_station=station, worst_gradient=grade,
        )
    if iters == 0:
        return profile, 0
    return ElevationProfile(profile.stations, z), iters


def _smooth_segment(seg: RoadSegment3D, max_iters: int) -> RoadSegment3D:
    limit = seg.road_class.max_gradient
    z, iters, converged = _smooth_arrays(seg.profile.stations, seg.profile.z,
                                         limit, max_iters)
    if iters > 0:
        seg.profile = ElevationProfile(seg.profile.stations, z)
        seg.smooth_iterations += iters
    if not converged:
        seg.flagged = True
    return seg


def enforce_gradients(net: RoadNetwork3D,
                      max_iters: int = DEFAULT_MAX_SMOOTH_ITERS) -> RoadNetwork3D:
    """Smooth every segment against its class limit.

    Segments that cannot converge are flagged and retained; that is
    reported data, not an error.  Per-segment iteration counts land in
    the provenance block.
    """
    iterations: dict[str, int] = {}
    for seg in net.segments:
        before = seg.smooth_iterations
        _smooth_segment(seg, max_iters)
        iterations[seg.id] = seg.smooth_iterations - before
    net.provenance.setdefault("smooth_iterations", {}).update(iterations)
    net.provenance["flagged_segments"] = sorted(s.id for s in net.segments if s.flagged)
    return net


def reconcile_intersections(net: RoadNetwork3D,
                            max_iters: int = DEFAULT_MAX_SMOOTH_ITERS) -> RoadNetwork3D:
    """Force one shared elevation per node and close intersection gaps.

    Every node elevation becomes the mean of its incident segment
    endpoint elevations; endpoints are snapped to that mean, so pairwise
    gaps at the node are exactly 0.  Segments whose first or last
    interval now violates the class limit are re-smoothed with the new
    endpoints pinned.
    """
    incident: dict[str, list[tuple[RoadSegment3D, int]]] = {nid: [] for nid in net.nodes}
    for seg in net.segments:
        incident[seg.from_node].append((seg, 0))
        incident[seg.to_node].append((seg, -1))

    for nid, ends in incident.items():
        if not ends:
            continue
        mean_z = float(np.mean([seg.profile.z[idx] for seg, idx in ends]))
        net.nodes[nid].z = mean_z
        for seg, idx in ends:
            seg.profile.z[idx] = mean_z

    extra: dict[str, int] = {}
    for seg in net.segments:
        grades = seg.profile.gradients()
        if (np.abs(grades) <= seg.road_class.max_gradient).all():
            continue
        before = seg.smooth_iterations
        _smooth_segment(seg, max_iters)
        extra[seg.id] = seg.smooth_iterations - before

    if extra:
        counts = net.provenance.setdefault("smooth_iterations", {})
        for sid, it in extra.items():
            counts[sid] = counts.get(sid, 0) + it
    net.provenance["flagged_segments"] = sorted(s.id for s in net.segments if s.flagged)
    return net


def build_3d(net2d: RoadNetwork2D, grid: DemGrid, *, mode: str = "idw4",
             max_smooth_iters: int = DEFAULT_MAX_SMOOTH_ITERS) -> RoadNetwork3D:
    """Run the full pipeline and record provenance."""
    net = stack(net2d, grid, mode)
    net = resample_network(net, grid, mode)
    net = enforce_gradients(net, max_smooth_iters)
    net = reconcile_intersections(net, max_smooth_iters)
    net.provenance = {
        "sampling_mode": mode,
        "resample_spacing_m": RESAMPLE_SPACING,
        "max_smooth_iters": max_smooth_iters,
        "stages": ["stack", "resample", "enforce_gradients", "reconcile_intersections"],
        "gradient_limits": {
            kind: limit
            for kind, limit in sorted(
                {s.road_class.kind: s.road_class.max_gradient for s in net.segments}.items()
            )
        },
        "smooth_iterations": net.provenance.get("smooth_iterations", {}),
        "flagged_segments": net.provenance.get("flagged_segments", []),
    }
    return net
