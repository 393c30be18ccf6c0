"""
Validating a lifted network
===========================

Builds a small network from a plane raster, then scores it twice: once
against its own input raster (self-consistency) and once against a
deliberately offset "survey" raster standing in for independent truth.
"""

import tempfile
from pathlib import Path

from roadlift.builder import build_3d
from roadlift.geo import UtmPoint
from roadlift.osm import frame_for_bbox, load_osm
from roadlift.synthetic import grid_osm, plane_dem
from roadlift.validation import validate_network

origin = UtmPoint(550000.0, 4180000.0, 10, "north")

osm_text, bbox = grid_osm(3, 3, 50.0, origin)
osm_path = Path(tempfile.mkdtemp()) / "roads.osm"
osm_path.write_text(osm_text)

dem = plane_dem(40, 40, 5.0, origin.easting - 50.0, origin.northing - 50.0,
                0.02, 0.01, 12.0)
frame_origin = frame_for_bbox(bbox).origin
grid = dem.shifted(-frame_origin.easting, -frame_origin.northing)

net = build_3d(load_osm(osm_path, bbox), grid)


def show(report):
    print("  reference      ", report.reference)
    print("  MAE / RMSE / max  %.4f / %.4f / %.4f m"
          % (report.mae_m, report.rmse_m, report.max_error_m))
    print("  compliance      %.1f%% of segments, %.1f%% of sub-segments"
          % (report.compliance_pct_segments, report.compliance_pct_subsegments))
    worst_gap = max(g["gap_m"] for g in report.intersection_gaps)
    print("  gaps            worst %.6f m over %d intersections (pass=%s)"
          % (worst_gap, len(report.intersection_gaps), report.gaps_pass))
    print("  verdict         %s" % ("PASS" if report.passed(100.0) else "FAIL"))


print("against the input raster:")
show(validate_network(net, grid))

# A truth raster 0.35 m higher everywhere: the error stats move to the
# offset while compliance and gaps, which are purely geometric, hold.
truth = plane_dem(40, 40, 5.0, origin.easting - 50.0, origin.northing - 50.0,
                  0.02, 0.01, 12.35)
truth = truth.shifted(-frame_origin.easting, -frame_origin.northing)

print("\nagainst an independent survey raster (+0.35 m):")
show(validate_network(net, grid, truth=truth))
