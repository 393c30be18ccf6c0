"""Project configuration: one TOML document drives every command.

Relative paths are resolved against the config file's directory.
Input paths must exist at load time; that is the config contract, so a
missing file is an input error, not a runtime surprise later.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dem import SAMPLING_MODES
from .network import DEFAULT_GRADIENT_LIMITS

_TOP_KEYS = {
    "osm_path", "dem_path", "bbox", "sampling_mode", "max_smooth_iters",
    "output_dir", "min_compliance_pct", "routes_path", "truth_dem_path",
    "gradient_limits", "sync",
}
_SYNC_KEYS = {"dt", "resync_threshold", "max_steps", "snap_distance"}


class ConfigError(ValueError):
    """Config file missing, malformed, or violating invariants."""


@dataclass
class ProjectConfig:
    osm_path: Path
    dem_path: Path
    bbox: tuple[float, float, float, float]
    sampling_mode: str = "idw4"
    max_smooth_iters: int = 1000
    gradient_limits: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_GRADIENT_LIMITS))
    dt: float = 0.05
    resync_threshold: float = 0.5
    max_steps: int = 1000
    snap_distance: float = 5.0
    min_compliance_pct: float = 100.0
    output_dir: Path = Path("out")
    routes_path: Path | None = None
    truth_dem_path: Path | None = None

    def __post_init__(self) -> None:
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(
                f"sampling_mode must be one of {SAMPLING_MODES}, "
                f"got {self.sampling_mode!r}"
            )
        if self.max_smooth_iters < 1:
            raise ConfigError(f"max_smooth_iters must be >= 1, got {self.max_smooth_iters!r}")
        if len(self.bbox) != 4:
            raise ConfigError(f"bbox must be 4 floats, got {self.bbox!r}")
        min_lon, min_lat, max_lon, max_lat = self.bbox
        if not (min_lon < max_lon and min_lat < max_lat):
            raise ConfigError(f"degenerate bbox {self.bbox!r}")
        for kind, limit in self.gradient_limits.items():
            if not (isinstance(limit, (int, float)) and limit > 0):
                raise ConfigError(f"gradient limit for {kind!r} must be positive")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not self.resync_threshold > 0:
            raise ConfigError(
                f"resync_threshold must be positive, got {self.resync_threshold!r}"
            )
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps!r}")
        if not self.snap_distance > 0:
            raise ConfigError(f"snap_distance must be positive, got {self.snap_distance!r}")
        if not 0.0 <= self.min_compliance_pct <= 100.0:
            raise ConfigError(
                f"min_compliance_pct must be in [0, 100], got {self.min_compliance_pct!r}"
            )
        for name in ("osm_path", "dem_path"):
            path = getattr(self, name)
            if not Path(path).is_file():
                raise ConfigError(f"{name} does not exist: {path}")
        for name in ("routes_path", "truth_dem_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} does not exist: {path}")


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    for key in ("osm_path", "dem_path", "bbox"):
        if key not in doc:
            raise ConfigError(f"missing required config key {key!r}")

    sync = doc.get("sync", {})
    unknown_sync = set(sync) - _SYNC_KEYS
    if unknown_sync:
        raise ConfigError(f"unknown [sync] key(s): {sorted(unknown_sync)}")

    base = path.parent

    def resolve(value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    limits = dict(DEFAULT_GRADIENT_LIMITS)
    limits.update(doc.get("gradient_limits", {}))
    unknown_kinds = set(limits) - set(DEFAULT_GRADIENT_LIMITS)
    if unknown_kinds:
        raise ConfigError(f"unknown road class in gradient_limits: {sorted(unknown_kinds)}")

    try:
        bbox = tuple(float(v) for v in doc["bbox"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bbox must be 4 numbers: {exc}") from exc

    return ProjectConfig(
        osm_path=resolve(doc["osm_path"]),
        dem_path=resolve(doc["dem_path"]),
        bbox=bbox,
        sampling_mode=doc.get("sampling_mode", "idw4"),
        max_smooth_iters=doc.get("max_smooth_iters", 1000),
        gradient_limits={k: float(v) for k, v in limits.items()},
        dt=float(sync.get("dt", 0.05)),
        resync_threshold=float(sync.get("resync_threshold", 0.5)),
        max_steps=int(sync.get("max_steps", 1000)),
        snap_distance=float(sync.get("snap_distance", 5.0)),
        min_compliance_pct=float(doc.get("min_compliance_pct", 100.0)),
        output_dir=resolve(doc.get("output_dir", "out")),
        routes_path=resolve(doc.get("routes_path")),
        truth_dem_path=resolve(doc.get("truth_dem_path")),
    )
