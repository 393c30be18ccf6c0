"""roadlift: 2D road networks + elevation rasters -> validated 3D road
networks, simulator exports, and a lockstep 2D-3D co-simulation harness.
"""

from .builder import (
    DegenerateSegmentError,
    SmoothingError,
    StackingError,
    build_3d,
    enforce_gradients,
    gradient,
    reconcile_intersections,
    resample_network,
    resample_segment,
    smooth_profile,
    stack,
)
from .config import ConfigError, ProjectConfig, load_config
from .dem import (
    DemGrid,
    GridFormatError,
    NodataStencilError,
    OutsideExtentError,
    ascii_grid_text,
    load_ascii_grid,
    parse_ascii_grid,
    sample,
    sample_many,
)
from .exporters import (
    ExportManifest,
    export_all,
    export_geojson,
    export_opendrive,
    export_sumo_net,
    validate_opendrive_subset,
)
from .geo import (
    GeoPointWgs,
    LocalFrame,
    Point3D,
    ProjectionRangeError,
    UtmPoint,
    ZoneMismatchError,
    local_to_wgs84,
    utm_to_wgs84,
    utm_zone,
    wgs84_to_utm,
)
from .network import (
    DEFAULT_GRADIENT_LIMITS,
    ElevationProfile,
    NetworkFormatError,
    RoadClass,
    RoadNetwork2D,
    RoadNetwork3D,
    RoadNode,
    RoadSegment2D,
    RoadSegment3D,
)
from .osm import EmptyNetworkError, OsmFormatError, classify, frame_for_bbox, parse_osm
from .validation import (
    PairedSamples,
    ValidationReport,
    elevation_error_stats,
    error_3d,
    gradient_compliance,
    intersection_gap_check,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRADIENT_LIMITS",
    "ConfigError",
    "DegenerateSegmentError",
    "DemGrid",
    "ElevationProfile",
    "EmptyNetworkError",
    "ExportManifest",
    "GeoPointWgs",
    "GridFormatError",
    "LocalFrame",
    "NetworkFormatError",
    "NodataStencilError",
    "OsmFormatError",
    "OutsideExtentError",
    "PairedSamples",
    "Point3D",
    "ProjectConfig",
    "ProjectionRangeError",
    "RoadClass",
    "RoadNetwork2D",
    "RoadNetwork3D",
    "RoadNode",
    "RoadSegment2D",
    "RoadSegment3D",
    "SmoothingError",
    "StackingError",
    "UtmPoint",
    "ValidationReport",
    "ZoneMismatchError",
    "ascii_grid_text",
    "build_3d",
    "classify",
    "elevation_error_stats",
    "enforce_gradients",
    "error_3d",
    "export_all",
    "export_geojson",
    "export_opendrive",
    "export_sumo_net",
    "frame_for_bbox",
    "gradient",
    "gradient_compliance",
    "intersection_gap_check",
    "load_ascii_grid",
    "load_config",
    "local_to_wgs84",
    "parse_ascii_grid",
    "parse_osm",
    "reconcile_intersections",
    "resample_network",
    "resample_segment",
    "sample",
    "sample_many",
    "smooth_profile",
    "stack",
    "utm_to_wgs84",
    "utm_zone",
    "validate_network",
    "validate_opendrive_subset",
    "wgs84_to_utm",
]
