"""WGS84 <-> UTM projection and local Cartesian frames.

Everything downstream of ingestion works in meters inside a single UTM
zone.  A ``LocalFrame`` re-bases eastings/northings against a project
origin so working coordinates stay small, which keeps float noise out of
geometry predicates.

The projection is the transverse Mercator computed with 6th-order
Krueger series in n (the third flattening).  Series error inside a UTM
zone is far below a millimeter, which is orders of magnitude tighter
than the rasters being sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# WGS84 ellipsoid.
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563

UTM_SCALE = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0

# Third flattening and the rectifying radius A.
_N = WGS84_F / (2.0 - WGS84_F)
_N2 = _N * _N
_N3 = _N2 * _N
_N4 = _N3 * _N
_N5 = _N4 * _N
_N6 = _N5 * _N
_E2 = WGS84_F * (2.0 - WGS84_F)
_RECTIFYING_RADIUS = WGS84_A / (1.0 + _N) * (1.0 + _N2 / 4.0 + _N4 / 64.0 + _N6 / 256.0)

# Forward (alpha) and reverse (beta) series coefficients, order n^6.
_ALPHA = (
    _N / 2.0 - 2.0 * _N2 / 3.0 + 5.0 * _N3 / 16.0 + 41.0 * _N4 / 180.0
    - 127.0 * _N5 / 288.0 + 7891.0 * _N6 / 37800.0,
    13.0 * _N2 / 48.0 - 3.0 * _N3 / 5.0 + 557.0 * _N4 / 1440.0
    + 281.0 * _N5 / 630.0 - 1983433.0 * _N6 / 1935360.0,
    61.0 * _N3 / 240.0 - 103.0 * _N4 / 140.0 + 15061.0 * _N5 / 26880.0
    + 167603.0 * _N6 / 181440.0,
    49561.0 * _N4 / 161280.0 - 179.0 * _N5 / 168.0 + 6601661.0 * _N6 / 7257600.0,
    34729.0 * _N5 / 80640.0 - 3418889.0 * _N6 / 1995840.0,
    212378941.0 * _N6 / 319334400.0,
)
_BETA = (
    _N / 2.0 - 2.0 * _N2 / 3.0 + 37.0 * _N3 / 96.0 - _N4 / 360.0
    - 81.0 * _N5 / 512.0 + 96199.0 * _N6 / 604800.0,
    _N2 / 48.0 + _N3 / 15.0 - 437.0 * _N4 / 1440.0 + 46.0 * _N5 / 105.0
    - 1118711.0 * _N6 / 3870720.0,
    17.0 * _N3 / 480.0 - 37.0 * _N4 / 840.0 - 209.0 * _N5 / 4480.0
    + 5569.0 * _N6 / 90720.0,
    4397.0 * _N4 / 161280.0 - 11.0 * _N5 / 504.0 - 830251.0 * _N6 / 7257600.0,
    4583.0 * _N5 / 161280.0 - 108847.0 * _N6 / 3991680.0,
    20648693.0 * _N6 / 638668800.0,
)


class ProjectionRangeError(ValueError):
    """Coordinate outside the validity range of the projection."""


class ZoneMismatchError(ValueError):
    """UTM point referred to a frame in a different zone or hemisphere."""


@dataclass(frozen=True)
class GeoPointWgs:
    """A WGS84 geographic coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ProjectionRangeError("latitude/longitude must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ProjectionRangeError(f"latitude {self.lat!r} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ProjectionRangeError(f"longitude {self.lon!r} outside [-180, 180]")


@dataclass(frozen=True)
class UtmPoint:
    """A projected coordinate in meters within one UTM zone."""

    easting: float
    northing: float
    zone: int
    hemisphere: str

    def __post_init__(self) -> None:
        if not 1 <= self.zone <= 60:
            raise ValueError(f"UTM zone {self.zone!r} outside [1, 60]")
        if self.hemisphere not in ("north", "south"):
            raise ValueError(f"hemisphere must be 'north' or 'south', got {self.hemisphere!r}")
        if not (math.isfinite(self.easting) and math.isfinite(self.northing)):
            raise ValueError("easting/northing must be finite")
        if not 0.0 < self.easting < 1000000.0:
            raise ValueError(f"easting {self.easting!r} outside (0, 1e6)")


@dataclass(frozen=True)
class Point3D:
    """A point in the local Cartesian frame, meters."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class LocalFrame:
    """Local Cartesian frame anchored at a UTM origin.

    Local x is easting minus the origin easting, local y the same for
    northing.  All points placed in one frame must come from the same
    zone and hemisphere.
    """

    origin: UtmPoint

    @property
    def zone(self) -> int:
        return self.origin.zone

    @property
    def hemisphere(self) -> str:
        return self.origin.hemisphere


def utm_zone(lon: float) -> int:
    """UTM zone number for a longitude in [-180, 180)."""
    if not -180.0 <= lon < 180.0:
        raise ProjectionRangeError(f"longitude {lon!r} outside [-180, 180)")
    return int(math.floor((lon + 180.0) / 6.0)) + 1


def central_meridian(zone: int) -> float:
    """Central meridian of a UTM zone, degrees."""
    if not 1 <= zone <= 60:
        raise ValueError(f"UTM zone {zone!r} outside [1, 60]")
    return -183.0 + 6.0 * zone


def wgs84_to_utm(p: GeoPointWgs, zone: int | None = None) -> UtmPoint:
    """Project a WGS84 point to UTM.

    ``zone`` pins the output zone; by default the point's natural zone
    is used.  Pinning matters when a network straddles a zone edge and
    every coordinate must live in the single project zone.
    """
    if abs(p.lat) > 84.0:
        raise ProjectionRangeError(f"latitude {p.lat!r} outside UTM validity [-84, 84]")
    if zone is None:
        zone = utm_zone(p.lon if p.lon < 180.0 else p.lon - 360.0)
    elif not 1 <= zone <= 60:
        raise ValueError(f"UTM zone {zone!r} outside [1, 60]")

    lat = math.radians(p.lat)
    dlon = math.radians(p.lon - central_meridian(zone))

    # Conformal latitude via tau' = tau * sqrt(1+sigma^2) - sigma * sqrt(1+tau^2).
    tau = math.tan(lat)
    sigma = math.sinh(math.atanh(math.sqrt(_E2) * math.sin(lat)) * math.sqrt(_E2))
    taup = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau)

    xi = math.atan2(taup, math.cos(dlon))
    eta = math.asinh(math.sin(dlon) / math.hypot(taup, math.cos(dlon)))
    xs = xi
    es = eta
    for j, a in enumerate(_ALPHA, start=1):
        xs += a * math.sin(2.0 * j * xi) * math.cosh(2.0 * j * eta)
        es += a * math.cos(2.0 * j * xi) * math.sinh(2.0 * j * eta)

    easting = FALSE_EASTING + UTM_SCALE * _RECTIFYING_RADIUS * es
    northing = UTM_SCALE * _RECTIFYING_RADIUS * xs
    hemisphere = "north" if p.lat >= 0.0 else "south"
    if hemisphere == "south":
        northing += FALSE_NORTHING_SOUTH
    return UtmPoint(easting, northing, zone, hemisphere)


def _tau_from_taup(taup: float) -> float:
    # Invert the conformal-latitude relation by Newton iteration.
    e = math.sqrt(_E2)
    tau = taup / (1.0 - _E2)
    stol = 1.5e-9 * max(1.0, abs(taup))
    for _ in range(10):
        sigma = math.sinh(e * math.atanh(e * tau / math.hypot(1.0, tau)))
        taup_i = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau)
        dtau = (taup - taup_i) * (1.0 + (1.0 - _E2) * tau * tau) / (
            (1.0 - _E2) * math.hypot(1.0, tau) * math.hypot(1.0, taup_i)
        )
        tau += dtau
        if abs(dtau) < stol:
            break
    return tau


def utm_to_wgs84(p: UtmPoint) -> GeoPointWgs:
    """Invert the projection back to WGS84 degrees."""
    northing = p.northing
    if p.hemisphere == "south":
        northing -= FALSE_NORTHING_SOUTH
    xi = northing / (UTM_SCALE * _RECTIFYING_RADIUS)
    eta = (p.easting - FALSE_EASTING) / (UTM_SCALE * _RECTIFYING_RADIUS)

    xs = xi
    es = eta
    for j, b in enumerate(_BETA, start=1):
        xs -= b * math.sin(2.0 * j * xi) * math.cosh(2.0 * j * eta)
        es -= b * math.cos(2.0 * j * xi) * math.sinh(2.0 * j * eta)

    taup = math.sin(xs) / math.hypot(math.sinh(es), math.cos(xs))
    tau = _tau_from_taup(taup)
    lat = math.degrees(math.atan(tau))
    lon = central_meridian(p.zone) + math.degrees(math.atan2(math.sinh(es), math.cos(xs)))
    return GeoPointWgs(lat, lon)


def to_local(p: UtmPoint, frame: LocalFrame) -> tuple[float, float]:
    """Express a UTM point in a local frame.  Zone/hemisphere must match."""
    if p.zone != frame.zone or p.hemisphere != frame.hemisphere:
        raise ZoneMismatchError(
            f"point in zone {p.zone}{p.hemisphere[0].upper()} but frame is "
            f"zone {frame.zone}{frame.hemisphere[0].upper()}"
        )
    return p.easting - frame.origin.easting, p.northing - frame.origin.northing


def from_local(x: float, y: float, frame: LocalFrame) -> UtmPoint:
    """Express local frame coordinates as a UTM point."""
    return UtmPoint(
        frame.origin.easting + x, frame.origin.northing + y, frame.zone, frame.hemisphere
    )


def local_to_wgs84(x: float, y: float, frame: LocalFrame) -> GeoPointWgs:
    """Convenience composition used by exporters."""
    return utm_to_wgs84(from_local(x, y, frame))
