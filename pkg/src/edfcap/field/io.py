"""Binary grid files and ASCII XYZ point-cloud ingestion.

Grid file layout (little-endian)::

    offset  size  field
    0       4     magic b"VGD1"
    4       4     u32 version (1)
    8       1     u8 kind (0 occupancy, 1 distance)
    9       24    u64 nx, ny, nz
    33      8     f64 resolution
    41      24    f64 origin x, y, z
    65      8     f64 max_distance (0 for occupancy)
    73      ...   payload, x varying fastest:
                  occupancy: nx*ny*nz bytes of 0/1
                  distance:  nx*ny*nz f32 values

Distance values are stored as f32, so saving a float64 grid rounds each value
to the nearest f32.
"""

from __future__ import annotations

import logging
import math
import struct
from pathlib import Path

import numpy as np

from ..errors import GridFormatError, InputError, ParseError
from ..geometry import Box
from .grid import DistanceGrid, GridSpec, OccupancyGrid, _cells_along

log = logging.getLogger(__name__)

MAGIC = b"VGD1"
VERSION = 1
KIND_OCCUPANCY = 0
KIND_DISTANCE = 1
_HEADER = struct.Struct("<4sIB3Q5d")
HEADER_SIZE = _HEADER.size  # 73


def save_grid(grid: OccupancyGrid | DistanceGrid, path) -> None:
    spec = grid.spec
    if isinstance(grid, OccupancyGrid):
        kind, max_distance = KIND_OCCUPANCY, 0.0
        payload = grid.cells.astype(np.uint8).ravel(order="F").tobytes()
    elif isinstance(grid, DistanceGrid):
        kind, max_distance = KIND_DISTANCE, grid.max_distance
        payload = grid.values.astype("<f4").ravel(order="F").tobytes()
    else:
        raise TypeError(f"cannot save {type(grid).__name__}")
    header = _HEADER.pack(MAGIC, VERSION, kind, *spec.dims, spec.resolution, *spec.origin, max_distance)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_grid(path) -> OccupancyGrid | DistanceGrid:
    data = Path(path).read_bytes()
    return parse_grid(data)


def parse_grid(data: bytes) -> OccupancyGrid | DistanceGrid:
    if len(data) < 4 or data[:4] != MAGIC:
        raise GridFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
    if len(data) < HEADER_SIZE:
        raise GridFormatError(f"truncated header: {len(data)} of {HEADER_SIZE} bytes", len(data))
    magic, version, kind, nx, ny, nz, res, ox, oy, oz, max_distance = _HEADER.unpack_from(data)
    if version != VERSION:
        raise GridFormatError(f"unsupported version {version}, expected {VERSION}", 4)
    if kind not in (KIND_OCCUPANCY, KIND_DISTANCE):
        raise GridFormatError(f"unknown grid kind {kind}", 8)
    if min(nx, ny, nz) < 1:
        raise GridFormatError(f"non-positive dims {(nx, ny, nz)}", 9)
    if not (math.isfinite(res) and res > 0):
        raise GridFormatError(f"invalid resolution {res}", 33)
    count = nx * ny * nz
    itemsize = 1 if kind == KIND_OCCUPANCY else 4
    expected = count * itemsize
    payload = data[HEADER_SIZE:]
    if len(payload) < expected:
        raise GridFormatError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            HEADER_SIZE + len(payload),
        )
    if len(payload) > expected:
        raise GridFormatError(f"{len(payload) - expected} trailing bytes after payload", HEADER_SIZE + expected)
    spec = GridSpec((ox, oy, oz), res, (nx, ny, nz))
    if kind == KIND_OCCUPANCY:
        raw = np.frombuffer(payload, dtype=np.uint8)
        if raw.size and raw.max() > 1:
            bad = int(np.argmax(raw > 1))
            raise GridFormatError(f"occupancy byte {raw[bad]} is not 0/1", HEADER_SIZE + bad)
        return OccupancyGrid(spec, raw.reshape((nx, ny, nz), order="F").astype(bool))
    if not max_distance > 0:
        raise GridFormatError(f"invalid max_distance {max_distance}", 65)
    values = np.frombuffer(payload, dtype="<f4").reshape((nx, ny, nz), order="F").astype(np.float64)
    return DistanceGrid(spec, values, max_distance)


def read_xyz(path) -> np.ndarray:
    """Parse whitespace-separated ``x y z`` lines; ``#`` comments and blanks skipped."""
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(f"expected 3 values, got {len(parts)}", line=lineno, path=str(path))
            try:
                xyz = [float(v) for v in parts]
            except ValueError as exc:
                raise ParseError(f"not a number: {exc}", line=lineno, path=str(path)) from None
            if not all(math.isfinite(v) for v in xyz):
                raise ParseError("non-finite coordinate", line=lineno, path=str(path))
            points.append(xyz)
    if not points:
        raise InputError(f"{path}: point cloud contains no points")
    return np.array(points, dtype=float)


def occupancy_from_points(points: np.ndarray, resolution: float, bounds: Box | None = None) -> OccupancyGrid:
    """Voxel occupied iff at least one point falls inside it.

    Without ``bounds`` the grid spans the cloud's bounding box padded by one
    voxel on every side. Points outside explicit bounds are dropped.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not len(pts):
        raise InputError("point cloud contains no points")
    if bounds is None:
        lo = pts.min(axis=0) - resolution
        hi = pts.max(axis=0) + resolution
        dims = tuple(_cells_along(e, resolution) for e in hi - lo)
        spec = GridSpec(tuple(lo), float(resolution), dims)
    else:
        spec = GridSpec.covering(bounds, resolution)
    idx, inside = spec.indices_of(pts)
    if not inside.all():
        log.warning("dropped %d of %d points outside the grid bounds", int((~inside).sum()), len(pts))
    cells = np.zeros(spec.dims, dtype=bool)
    ii = idx[inside]
    cells[ii[:, 0], ii[:, 1], ii[:, 2]] = True
    return OccupancyGrid(spec, cells)


def ingest_xyz(path, resolution: float, bounds: Box | None = None) -> OccupancyGrid:
    return occupancy_from_points(read_xyz(path), resolution, bounds)
