"""ESRI ASCII grid elevation rasters and point sampling.

Grids are normalized on parse: row 0 of ``data`` is the southernmost
row and the origin is the cell-center coordinate of the southwest grid
node, regardless of whether the file declared corner or center origins.
Nodata cells are held as NaN.

Two sampling modes are provided.  ``idw4`` is inverse-distance
weighting over the four surrounding grid nodes and is the default;
``bilinear`` is the usual separable interpolation on the same stencil.
Both return a stored node value bit-exactly when the query lands on a
node.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

SAMPLING_MODES = ("idw4", "bilinear")

# A query closer to a grid node than this (meters) is treated as an
# exact hit and returns the stored value unchanged.
EXACT_HIT_DISTANCE = 1e-9

# Slack allowed when a query sits numerically on the raster hull.
_EDGE_TOL = 1e-9

_REQUIRED_HEADERS = ("ncols", "nrows", "cellsize")


class GridFormatError(ValueError):
    """Malformed ASCII grid text."""


class OutsideExtentError(ValueError):
    """Query point outside the grid-node hull."""


class NodataStencilError(ValueError):
    """A nodata cell participates in the interpolation stencil."""


@dataclass
class DemGrid:
    """A regular elevation raster in projected meters.

    ``data[j, i]`` is the elevation of the node at
    ``(x0 + i * cellsize, y0 + j * cellsize)``; NaN marks nodata.
    """

    data: np.ndarray
    x0: float
    y0: float
    cellsize: float
    nodata_value: float = -9999.0

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 2 or self.data.shape[1] < 2:
            raise GridFormatError(f"grid must be at least 2x2, got shape {self.data.shape}")
        if not self.cellsize > 0.0:
            raise GridFormatError(f"cellsize must be positive, got {self.cellsize!r}")

    @property
    def nrows(self) -> int:
        return self.data.shape[0]

    @property
    def ncols(self) -> int:
        return self.data.shape[1]

    @property
    def x_max(self) -> float:
        return self.x0 + (self.ncols - 1) * self.cellsize

    @property
    def y_max(self) -> float:
        return self.y0 + (self.nrows - 1) * self.cellsize

    def node_x(self, i: int) -> float:
        return self.x0 + i * self.cellsize

    def node_y(self, j: int) -> float:
        return self.y0 + j * self.cellsize

    def shifted(self, dx: float, dy: float) -> "DemGrid":
        """Same raster with the origin translated by (dx, dy)."""
        return DemGrid(self.data, self.x0 + dx, self.y0 + dy, self.cellsize, self.nodata_value)


def parse_ascii_grid(text: str) -> DemGrid:
    """Parse ESRI ASCII grid text.

    Headers are case-insensitive; ``xllcorner``/``xllcenter`` (and the
    y equivalents) are both accepted, ``nodata_value`` is optional.
    The first data row in the file is the northernmost.
    """
    lines = text.splitlines()
    headers: dict[str, float] = {}
    body_start = 0
    for idx, line in enumerate(lines):
        parts = line.split()
        if not parts:
            body_start = idx + 1
            continue
        key = parts[0].lower()
        if key in ("ncols", "nrows", "xllcorner", "xllcenter", "yllcorner",
                   "yllcenter", "cellsize", "nodata_value"):
            if len(parts) != 2:
                raise GridFormatError(f"malformed header line {idx + 1}: {line!r}")
            try:
                headers[key] = float(parts[1])
            except ValueError:
                raise GridFormatError(
                    f"non-numeric header value on line {idx + 1}: {parts[1]!r}"
                ) from None
            body_start = idx + 1
        else:
            break

    for key in _REQUIRED_HEADERS:
        if key not in headers:
            raise GridFormatError(f"missing required header {key!r}")
    if ("xllcorner" in headers) == ("xllcenter" in headers):
        raise GridFormatError("exactly one of xllcorner/xllcenter is required")
    if ("yllcorner" in headers) == ("yllcenter" in headers):
        raise GridFormatError("exactly one of yllcorner/yllcenter is required")

    ncols = int(headers["ncols"])
    nrows = int(headers["nrows"])
    cellsize = headers["cellsize"]
    if ncols != headers["ncols"] or nrows != headers["nrows"]:
        raise GridFormatError("ncols/nrows must be integers")
    if ncols < 2 or nrows < 2 or cellsize <= 0.0:
        raise GridFormatError(
            f"grid must be at least 2x2 with positive cellsize "
            f"(ncols={ncols}, nrows={nrows}, cellsize={cellsize!r})"
        )

    body = "\n".join(lines[body_start:])
    tokens = body.split()
    if len(tokens) != ncols * nrows:
        raise GridFormatError(
            f"expected {ncols * nrows} data values, found {len(tokens)}"
        )
    try:
        flat = np.array(tokens, dtype=np.float64)
    except ValueError:
        bad = next(t for t in tokens if not _is_float(t))
        raise GridFormatError(f"non-numeric data token {bad!r}") from None

    # File rows run north to south; flip so row 0 is the south edge.
    data = flat.reshape(nrows, ncols)[::-1].copy()

    nodata = headers.get("nodata_value")
    if nodata is not None:
        data[data == nodata] = np.nan

    x0 = headers.get("xllcenter", headers.get("xllcorner", 0.0))
    y0 = headers.get("yllcenter", headers.get("yllcorner", 0.0))
    if "xllcorner" in headers:
        x0 += cellsize / 2.0
    if "yllcorner" in headers:
        y0 += cellsize / 2.0

    return DemGrid(data, x0, y0, cellsize,
                   nodata if nodata is not None else -9999.0)


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_ascii_grid(path: str | Path) -> DemGrid:
    return parse_ascii_grid(Path(path).read_text())


def ascii_grid_text(grid: DemGrid) -> str:
    """Serialize a grid back to ASCII text (center-origin headers).

    ``parse_ascii_grid(ascii_grid_text(g))`` reproduces ``g`` bit-exactly.
    """
    out = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcenter {grid.x0!r}",
        f"yllcenter {grid.y0!r}",
        f"cellsize {grid.cellsize!r}",
        f"nodata_value {grid.nodata_value!r}",
    ]
    data = np.where(np.isnan(grid.data), grid.nodata_value, grid.data)
    for row in data[::-1]:
        out.append(" ".join(repr(v) for v in row.tolist()))
    return "\n".join(out) + "\n"


def sample_many(grid: DemGrid, xy: np.ndarray, mode: str = "idw4") -> np.ndarray:
    """Sample elevations at an (N, 2) array of xy points.

    Raises OutsideExtentError if any point leaves the node hull and
    NodataStencilError if any stencil touches a nodata cell; both name
    the first offending point index.
    """
    if mode not in SAMPLING_MODES:
        raise ValueError(f"unknown sampling mode {mode!r}; expected one of {SAMPLING_MODES}")
    xy = np.asarray(xy, dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError(f"xy must have shape (N, 2), got {xy.shape}")
    if xy.shape[0] == 0:
        return np.empty(0, dtype=np.float64)

    x = xy[:, 0]
    y = xy[:, 1]
    h = grid.cellsize

    bad = (x < grid.x0 - _EDGE_TOL) | (x > grid.x_max + _EDGE_TOL) | \
          (y < grid.y0 - _EDGE_TOL) | (y > grid.y_max + _EDGE_TOL)
    if bad.any():
        k = int(np.argmax(bad))
        raise OutsideExtentError(
            f"point {k} at ({float(x[k])!r}, {float(y[k])!r}) outside raster extent "
            f"x [{grid.x0!r}, {grid.x_max!r}] y [{grid.y0!r}, {grid.y_max!r}]"
        )

    fx = (x - grid.x0) / h
    fy = (y - grid.y0) / h
    i0 = np.clip(np.floor(fx).astype(np.intp), 0, grid.ncols - 2)
    j0 = np.clip(np.floor(fy).astype(np.intp), 0, grid.nrows - 2)

    # Corner node coordinates and values, shape (N, 4).
    ci = np.stack([i0, i0 + 1, i0, i0 + 1], axis=1)
    cj = np.stack([j0, j0, j0 + 1, j0 + 1], axis=1)
    cx = grid.x0 + ci * h
    cy = grid.y0 + cj * h
    cz = grid.data[cj, ci]

    if np.isnan(cz).any():
        k = int(np.argmax(np.isnan(cz).any(axis=1)))
        raise NodataStencilError(
            f"point {k} at ({float(x[k])!r}, {float(y[k])!r}) has nodata in its stencil"
        )

    d = np.hypot(cx - x[:, None], cy - y[:, None])
    nearest = np.argmin(d, axis=1)
    hit = d[np.arange(len(d)), nearest] < EXACT_HIT_DISTANCE

    if mode == "idw4":
        with np.errstate(divide="ignore"):
            w = 1.0 / d
        w[hit] = 0.0  # avoid inf rows; hits are overwritten below
        z = (w * cz).sum(axis=1) / np.where(hit, 1.0, w.sum(axis=1))
    else:
        t = fx - i0
        u = fy - j0
        z = ((1.0 - t) * (1.0 - u) * cz[:, 0] + t * (1.0 - u) * cz[:, 1]
             + (1.0 - t) * u * cz[:, 2] + t * u * cz[:, 3])

    if hit.any():
        z[hit] = cz[hit, nearest[hit]]
    return z


def sample(grid: DemGrid, x: float, y: float, mode: str = "idw4") -> float:
    """Sample one elevation; see sample_many."""
    return float(sample_many(grid, np.array([[x, y]]), mode)[0])
