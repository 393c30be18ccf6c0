"""Command line entry points: build, validate, export, cosim, all.

Exit codes: 0 success, 1 internal error, 2 invalid input or config,
3 validation failure.  The only environment variable honored is
ROADLIFT_LOG_LEVEL (log verbosity); everything else comes from the
config file and flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from .builder import StackingError, build_3d
from .config import ConfigError, ProjectConfig, load_config
from .cosim import (
    OffNetworkError,
    RouteError,
    SyncConfig,
    load_routes,
    run_scenario,
)
from .dem import (
    DemGrid,
    GridFormatError,
    NodataStencilError,
    OutsideExtentError,
    load_ascii_grid,
)
from .exporters import FORMATS, ExportGeometryError, export_all
from .network import NetworkFormatError, RoadNetwork3D
from .osm import EmptyNetworkError, OsmFormatError, frame_for_bbox, load_osm
from .validation import validate_network

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_VALIDATION = 3

ARTIFACT_NAME = "network.json"
REPORT_NAME = "report.json"
TRACE_NAME = "trace.jsonl"
COSIM_SUMMARY_NAME = "cosim_summary.json"

_INPUT_ERRORS = (
    ConfigError,
    OsmFormatError,
    GridFormatError,
    EmptyNetworkError,
    NetworkFormatError,
    RouteError,
    StackingError,
    OffNetworkError,
    ExportGeometryError,
    OutsideExtentError,
    NodataStencilError,
    FileNotFoundError,
    ValueError,
)


def _local_grid(path: Path, cfg: ProjectConfig) -> DemGrid:
    """Load a raster and re-base it into the project's local frame."""
    grid = load_ascii_grid(path)
    origin = frame_for_bbox(cfg.bbox).origin
    return grid.shifted(-origin.easting, -origin.northing)


def _artifact_path(cfg: ProjectConfig) -> Path:
    return cfg.output_dir / ARTIFACT_NAME


def _load_artifact(cfg: ProjectConfig) -> RoadNetwork3D:
    path = _artifact_path(cfg)
    if not path.is_file():
        raise ConfigError(f"network artifact does not exist: {path} (run build first)")
    return RoadNetwork3D.load(path)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_build(cfg: ProjectConfig) -> int:
    net2d = load_osm(cfg.osm_path, cfg.bbox, cfg.gradient_limits)
    grid = _local_grid(cfg.dem_path, cfg)
    net = build_3d(net2d, grid, mode=cfg.sampling_mode,
                   max_smooth_iters=cfg.max_smooth_iters)
    net.provenance["inputs"] = {
        "osm_sha256": _sha256_file(cfg.osm_path),
        "dem_sha256": _sha256_file(cfg.dem_path),
        "bbox": list(cfg.bbox),
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = _artifact_path(cfg)
    net.save(path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(cfg: ProjectConfig) -> int:
    net = _load_artifact(cfg)
    grid = _local_grid(cfg.dem_path, cfg)
    truth = _local_grid(cfg.truth_dem_path, cfg) if cfg.truth_dem_path else None
    report = validate_network(net, grid, truth=truth, mode=cfg.sampling_mode)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / REPORT_NAME
    report.save(path)
    print(f"wrote {path}")
    if not report.passed(cfg.min_compliance_pct):
        print(
            f"validation failed: gaps_pass={report.gaps_pass}, "
            f"compliance {report.compliance_pct_segments:.2f}% / "
            f"{report.compliance_pct_subsegments:.2f}% "
            f"(floor {cfg.min_compliance_pct}%)",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_export(cfg: ProjectConfig, formats: tuple[str, ...]) -> int:
    net = _load_artifact(cfg)
    manifest = export_all(net, cfg.output_dir, formats)
    for entry in manifest.files:
        print(f"wrote {cfg.output_dir / entry['path']}")
    print(f"wrote {cfg.output_dir / 'export_manifest.json'}")
    return EXIT_OK


def cmd_cosim(cfg: ProjectConfig, seed: int, fault_at: int | None,
              fault_offset: float) -> int:
    if cfg.routes_path is None:
        raise ConfigError("cosim requires routes_path in the config")
    net = _load_artifact(cfg)
    routes = load_routes(Path(cfg.routes_path).read_text())
    sync = SyncConfig(dt=cfg.dt, resync_threshold=cfg.resync_threshold,
                      max_steps=cfg.max_steps, snap_distance=cfg.snap_distance)
    result = run_scenario(net, routes, sync, seed=seed,
                          fault_at=fault_at, fault_offset=fault_offset)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    trace_path = cfg.output_dir / TRACE_NAME
    trace_path.write_text(result["trace"])
    summary_path = cfg.output_dir / COSIM_SUMMARY_NAME
    summary_path.write_text(json.dumps(result["summary"], sort_keys=True, indent=2) + "\n")
    print(f"wrote {trace_path}")
    print(f"wrote {summary_path}")
    return EXIT_OK


def cmd_all(cfg: ProjectConfig, formats: tuple[str, ...]) -> int:
    code = cmd_build(cfg)
    if code != EXIT_OK:
        return code
    code = cmd_validate(cfg)
    if code != EXIT_OK:
        return code
    return cmd_export(cfg, formats)


def _parse_formats(text: str) -> tuple[str, ...]:
    formats = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    if not formats:
        raise ConfigError("empty --formats")
    return formats


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadlift",
        description="Fuse OSM roads with elevation rasters into 3D networks, "
                    "export them, and replay lockstep 2D-3D co-simulation runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="project TOML config")
        p.add_argument("--out", help="override the config output directory")

    p_build = sub.add_parser("build", help="ingest inputs and write the network artifact")
    add_common(p_build)

    p_validate = sub.add_parser("validate", help="compute metrics, write report.json")
    add_common(p_validate)

    p_export = sub.add_parser("export", help="write simulator formats + manifest")
    add_common(p_export)
    p_export.add_argument("--formats", default=",".join(FORMATS),
                          help=f"comma-separated subset of {','.join(FORMATS)}")

    p_cosim = sub.add_parser("cosim", help="run the lockstep co-simulation")
    add_common(p_cosim)
    p_cosim.add_argument("--seed", type=int, default=0)
    p_cosim.add_argument("--fault-at", type=int, default=None,
                         help="1-based step at which to inject a position fault")
    p_cosim.add_argument("--fault-offset", type=float, default=0.6,
                         help="fault displacement in meters (with --fault-at)")

    p_all = sub.add_parser("all", help="build, validate, export in sequence")
    add_common(p_all)
    p_all.add_argument("--formats", default=",".join(FORMATS))

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ROADLIFT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = Path(args.out)
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "export":
            return cmd_export(cfg, _parse_formats(args.formats))
        if args.command == "cosim":
            return cmd_cosim(cfg, args.seed, args.fault_at, args.fault_offset)
        if args.command == "all":
            return cmd_all(cfg, _parse_formats(args.formats))
        parser.error(f"unknown command {args.command!r}")
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
