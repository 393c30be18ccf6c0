"""Quality metrics for a built 3D network and the report.json document.

The reference elevation for each station is a fresh re-sampling of the
input raster at the output xy (self-consistency check); a separate
higher-resolution grid can be passed to serve as ground truth instead.
Gradient compliance is reported against two denominators, whole original
segments and individual station intervals, because aggregate percent
alone hides which one is meant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dem import DemGrid, sample_many
from .network import RoadNetwork3D, interpolate_polyline

REPORT_SCHEMA = "validation-report/1"

# Elevations of incident segment ends at one intersection must agree
# within this (meters), strict inequality.
MAX_INTERSECTION_GAP = 0.1


@dataclass
class PairedSamples:
    """Generated vs reference elevations, index-aligned; optionally the
    full 3D points behind each pair."""

    generated: np.ndarray
    actual: np.ndarray
    points_generated: np.ndarray | None = None
    points_actual: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.generated = np.asarray(self.generated, dtype=np.float64)
        self.actual = np.asarray(self.actual, dtype=np.float64)
        if self.generated.shape != self.actual.shape or self.generated.ndim != 1:
            raise ValueError("generated and actual must be equal-length 1-D arrays")
        for name in ("points_generated", "points_actual"):
            pts = getattr(self, name)
            if pts is not None:
                pts = np.asarray(pts, dtype=np.float64)
                if pts.shape != (len(self.generated), 3):
                    raise ValueError(f"{name} must have shape (N, 3)")
                setattr(self, name, pts)


def elevation_error_stats(pairs: PairedSamples) -> tuple[float, float, float]:
    """(MAE, RMSE, max absolute error) of the elevation discrepancies."""
    if len(pairs.generated) == 0:
        raise ValueError("no sample pairs")
    d = np.abs(pairs.generated - pairs.actual)
    return float(d.mean()), float(np.sqrt((d * d).mean())), float(d.max())


def error_3d(pairs: PairedSamples) -> tuple[np.ndarray, float, float]:
    """Per-pair 3D Euclidean distance plus (max, mean)."""
    if pairs.points_generated is None or pairs.points_actual is None:
        raise ValueError("pairs carry no 3D points")
    if len(pairs.generated) == 0:
        raise ValueError("no sample pairs")
    d = np.linalg.norm(pairs.points_generated - pairs.points_actual, axis=1)
    return d, float(d.max()), float(d.mean())


def gradient_compliance(net: RoadNetwork3D) -> tuple[float, float, list[str]]:
    """Compliance percent over (original segments, station intervals).

    A station interval is valid iff its |grade| is within the segment's
    class limit; a segment is valid iff all its intervals are.  Returns
    the two percentages and the ids of invalid segments.
    """
    total_segments = len(net.segments)
    total_intervals = 0
    valid_segments = 0
    valid_intervals = 0
    invalid_ids: list[str] = []
    for seg in net.segments:
        ok = np.abs(seg.profile.gradients()) <= seg.road_class.max_gradient
        total_intervals += len(ok)
        valid_intervals += int(ok.sum())
        if ok.all():
            valid_segments += 1
        else:
            invalid_ids.append(seg.id)
    if total_segments == 0:
        return 100.0, 100.0, []
    pct_segments = 100.0 * valid_segments / total_segments
    pct_intervals = 100.0 * valid_intervals / total_intervals if total_intervals else 100.0
    return pct_segments, pct_intervals, sorted(invalid_ids)


def intersection_gap_check(net: RoadNetwork3D) -> list[dict]:
    """Max pairwise elevation gap among incident segment ends, per
    intersection node; pass iff gap < 0.1 m (strict)."""
    end_z: dict[str, list[float]] = {}
    for seg in net.segments:
        end_z.setdefault(seg.from_node, []).append(float(seg.profile.z[0]))
        end_z.setdefault(seg.to_node, []).append(float(seg.profile.z[-1]))
    out = []
    for node in sorted(net.intersection_nodes(), key=lambda n: n.id):
        zs = end_z.get(node.id, [])
        gap = float(max(zs) - min(zs)) if len(zs) >= 2 else 0.0
        out.append({"node_id": node.id, "gap_m": gap, "pass": gap < MAX_INTERSECTION_GAP})
    return out


@dataclass
class ValidationReport:
    sampling_mode: str
    reference: str
    mae_m: float
    rmse_m: float
    max_error_m: float
    error3d_mean_m: float
    error3d_max_m: float
    compliance_pct_segments: float
    compliance_pct_subsegments: float
    invalid_segments: list[str]
    flagged_segments: list[str]
    intersection_gaps: list[dict]
    gaps_pass: bool
    counts: dict
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def passed(self, min_compliance_pct: float = 100.0) -> bool:
        return (
            self.gaps_pass
            and self.compliance_pct_segments >= min_compliance_pct
            and self.compliance_pct_subsegments >= min_compliance_pct
        )

    def to_json_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "timestamp": self.timestamp,
            "sampling_mode": self.sampling_mode,
            "reference": self.reference,
            "mae_m": self.mae_m,
            "rmse_m": self.rmse_m,
            "max_error_m": self.max_error_m,
            "error3d_mean_m": self.error3d_mean_m,
            "error3d_max_m": self.error3d_max_m,
            "compliance_pct_segments": self.compliance_pct_segments,
            "compliance_pct_subsegments": self.compliance_pct_subsegments,
            "invalid_segments": self.invalid_segments,
            "flagged_segments": self.flagged_segments,
            "intersection_gaps": self.intersection_gaps,
            "gaps_pass": self.gaps_pass,
            "counts": self.counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        doc = json.loads(text)
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"expected schema {REPORT_SCHEMA!r}, got {doc.get('schema')!r}")
        return cls(
            sampling_mode=doc["sampling_mode"],
            reference=doc["reference"],
            mae_m=doc["mae_m"],
            rmse_m=doc["rmse_m"],
            max_error_m=doc["max_error_m"],
            error3d_mean_m=doc["error3d_mean_m"],
            error3d_max_m=doc["error3d_max_m"],
            compliance_pct_segments=doc["compliance_pct_segments"],
            compliance_pct_subsegments=doc["compliance_pct_subsegments"],
            invalid_segments=doc["invalid_segments"],
            flagged_segments=doc["flagged_segments"],
            intersection_gaps=doc["intersection_gaps"],
            gaps_pass=doc["gaps_pass"],
            counts=doc["counts"],
            timestamp=doc["timestamp"],
        )


def network_pairs(net: RoadNetwork3D, grid: DemGrid, mode: str) -> PairedSamples:
    """Pair every station elevation with a fresh raster sample there."""
    gen_z = []
    xys = []
    for seg in sorted(net.segments, key=lambda s: s.id):
        xy = interpolate_polyline(seg.polyline, seg.profile.stations)
        xys.append(xy)
        gen_z.append(seg.profile.z)
    if not xys:
        raise ValueError("network has no segments")
    xy = np.concatenate(xys)
    gen_z = np.concatenate(gen_z)
    ref_z = sample_many(grid, xy, mode)
    return PairedSamples(
        generated=gen_z,
        actual=ref_z,
        points_generated=np.column_stack([xy, gen_z]),
        points_actual=np.column_stack([xy, ref_z]),
    )


def validate_network(
    net: RoadNetwork3D,
    grid: DemGrid,
    truth: DemGrid | None = None,
    mode: str | None = None,
) -> ValidationReport:
    """Compute the full metric suite against the raster (or a truth grid)."""
    if mode is None:
        mode = net.provenance.get("sampling_mode", "idw4")
    reference_grid = truth if truth is not None else grid
    reference_name = "truth_grid" if truth is not None else "input_dem"

    pairs = network_pairs(net, reference_grid, mode)
    mae, rmse, max_err = elevation_error_stats(pairs)
    _, e3d_max, e3d_mean = error_3d(pairs)
    pct_seg, pct_sub, invalid = gradient_compliance(net)
    gaps = intersection_gap_check(net)

    n_intervals = sum(len(s.profile.stations) - 1 for s in net.segments)
    return ValidationReport(
        sampling_mode=mode,
        reference=reference_name,
        mae_m=mae,
        rmse_m=rmse,
        max_error_m=max_err,
        error3d_mean_m=e3d_mean,
        error3d_max_m=e3d_max,
        compliance_pct_segments=pct_seg,
        compliance_pct_subsegments=pct_sub,
        invalid_segments=invalid,
        flagged_segments=sorted(s.id for s in net.segments if s.flagged),
        intersection_gaps=gaps,
        gaps_pass=all(g["pass"] for g in gaps),
        counts={
            "nodes": len(net.nodes),
            "segments": len(net.segments),
            "subsegments": n_intervals,
            "intersections": len(net.intersection_nodes()),
            "sample_pairs": int(len(pairs.generated)),
        },
    )
