"""
Exporting simulator formats
===========================

Lifts a small network and writes the three simulator formats plus the
checksum manifest, then peeks at each file and re-checks the OpenDRIVE
output against the subset rules this package guarantees.
"""

import json
import tempfile
from pathlib import Path

from roadlift.builder import build_3d
from roadlift.exporters import export_all, validate_opendrive_subset
from roadlift.geo import UtmPoint
from roadlift.osm import frame_for_bbox, load_osm
from roadlift.synthetic import plane_dem, ramp_osm

origin = UtmPoint(550000.0, 4180000.0, 10, "north")

# A single 200 m road on an 8% slope.
osm_text, bbox = ramp_osm(200.0, origin)
work = Path(tempfile.mkdtemp())
(work / "roads.osm").write_text(osm_text)
dem = plane_dem(60, 20, 5.0, origin.easting - 50.0, origin.northing - 50.0,
                0.08, 0.0, 0.0)
frame_origin = frame_for_bbox(bbox).origin
net = build_3d(load_osm(work / "roads.osm", bbox),
               dem.shifted(-frame_origin.easting, -frame_origin.northing),
               mode="bilinear")

out = work / "exports"
manifest = export_all(net, out)

print("wrote to", out)
for entry in manifest.files:
    print("  %-18s %-8s sha256 %s..." % (entry["path"], entry["format"],
                                         entry["sha256"][:16]))

# GeoJSON: WGS84 LineStrings with metric z.
doc = json.loads((out / "network.geojson").read_text())
line = doc["features"][0]
first, last = line["geometry"]["coordinates"][0], line["geometry"]["coordinates"][-1]
print("\ngeojson %s: %d vertices, z %.3f -> %.3f m"
      % (line["properties"]["id"], len(line["geometry"]["coordinates"]),
         first[2], last[2]))

# OpenDRIVE: plan view plus an elevation polynomial per road.  A
# constant 8% grade coalesces into a single linear record.
xodr = (out / "network.xodr").read_text()
for ln in xodr.splitlines():
    if "<elevation " in ln:
        print("opendrive elevation record:", ln.strip())
problems = validate_opendrive_subset(xodr)
print("subset check:", "clean" if not problems else problems)

# SUMO plain net: one edge per direction with 3D shape points.
netxml = (out / "network.net.xml").read_text()
edges = [ln for ln in netxml.splitlines() if "<edge " in ln]
print("\nsumo edges: %d (forward + reverse)" % len(edges))
shape = edges[0].split('shape="')[1].split('"')[0].split(" ")
print("first edge shape: %d points, starts %s, ends %s"
      % (len(shape), shape[0], shape[-1]))
