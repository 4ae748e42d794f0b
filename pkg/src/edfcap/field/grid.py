"""Voxel grids: occupancy, Euclidean distance transform and point lookup."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import DomainError, ResourceError
from ..geometry import Box, Point3, Sphere
from .scene import Scene

DEFAULT_VOXEL_BUDGET = 200_000_000
DEFAULT_MAX_DISTANCE = 100.0


class LookupMode(enum.Enum):
    RAW = "raw"
    CONSERVATIVE = "conservative"


class OutOfBounds(enum.Enum):
    TREAT_FREE = "free"
    TREAT_OCCUPIED = "occupied"


def _cells_along(extent: float, resolution: float) -> int:
    # round() absorbs float noise such as 5.65 / 0.1 = 56.49999999999999
    return max(1, math.ceil(round(extent / resolution, 9)))


@dataclass(frozen=True)
class GridSpec:
    """Geometry header shared by occupancy and distance grids.

    Voxel ``(i, j, k)`` spans ``origin + [i, i+1) * resolution`` on x (and
    likewise on y, z); its center is ``origin + (i + 0.5) * resolution``.
    """

    origin: Point3
    resolution: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", Point3.of(self.origin))
        if not (math.isfinite(self.resolution) and self.resolution > 0):
            raise DomainError(f"resolution must be positive, got {self.resolution}")
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or any(n < 1 for n in dims):
            raise DomainError(f"grid dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def covering(cls, bounds: Box, resolution: float) -> "GridSpec":
        if not resolution > 0:
            raise DomainError(f"resolution must be positive, got {resolution}")
        dims = tuple(_cells_along(e, resolution) for e in bounds.extent)
        return cls(bounds.min, float(resolution), dims)

    @property
    def size(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def half_diagonal(self) -> float:
        return 0.5 * math.sqrt(3.0) * self.resolution

    @property
    def upper(self) -> Point3:
        return Point3(*(o + n * self.resolution for o, n in zip(self.origin, self.dims)))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.resolution

    def center(self, i: int, j: int, k: int) -> Point3:
        o, h = self.origin, self.resolution
        return Point3(o[0] + (i + 0.5) * h, o[1] + (j + 0.5) * h, o[2] + (k + 0.5) * h)

    def centers(self) -> np.ndarray:
        """All voxel centers as an ``(nx, ny, nz, 3)`` array."""
        xs, ys, zs = (self.axis_centers(a) for a in range(3))
        return np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)

    def index_of(self, p) -> tuple[int, int, int] | None:
        """Index of the voxel containing ``p``, or None outside the grid."""
        o, h = self.origin, self.resolution
        idx = tuple(math.floor((p[a] - o[a]) / h) for a in range(3))
        if all(0 <= idx[a] < self.dims[a] for a in range(3)):
            return idx
        return None

    def indices_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`index_of`: ``(int index array (n, 3), inside mask)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        idx = np.floor((pts - np.asarray(self.origin)) / self.resolution).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=1)
        return idx, inside


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    spec: GridSpec
    cells: np.ndarray  # bool, shape dims, indexed [i, j, k]

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != self.spec.dims:
            raise DomainError(f"cell array shape {cells.shape} != grid dims {self.spec.dims}")
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.cells, other.cells)

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells))

    def occupied_centers(self) -> np.ndarray:
        idx = np.argwhere(self.cells)
        return np.asarray(self.spec.origin) + (idx + 0.5) * self.spec.resolution


@dataclass(frozen=True, eq=False)
class DistanceGrid:
    spec: GridSpec
    values: np.ndarray  # float64, shape dims
    max_distance: float = DEFAULT_MAX_DISTANCE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.spec.dims:
            raise DomainError(f"value array shape {values.shape} != grid dims {self.spec.dims}")
        if not self.max_distance > 0:
            raise DomainError(f"max_distance must be positive, got {self.max_distance}")
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, DistanceGrid):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.max_distance == other.max_distance
            and np.array_equal(self.values, other.values)
        )


def voxelize(scene: Scene, resolution: float, voxel_budget: int = DEFAULT_VOXEL_BUDGET) -> OccupancyGrid:
    """Mark every voxel whose center lies inside or on a scene primitive."""
    spec = GridSpec.covering(scene.bounds, resolution)
    if spec.size > voxel_budget:
        raise ResourceError(
            f"grid {spec.dims} has {spec.size} voxels, above the budget of {voxel_budget}"
        )
    cells = np.zeros(spec.dims, dtype=bool)
    axes = [spec.axis_centers(a) for a in range(3)]
    for prim in scene.primitives:
        if isinstance(prim, Box):
            sel = [np.flatnonzero((c >= prim.min[a]) & (c <= prim.max[a])) for a, c in enumerate(axes)]
            if all(s.size for s in sel):
                cells[np.ix_(*sel)] = True
        elif isinstance(prim, Sphere):
            ctr, rad = prim.center, prim.radius
            sel = [np.flatnonzero(np.abs(c - ctr[a]) <= rad) for a, c in enumerate(axes)]
            if not all(s.size for s in sel):
                continue
            dx = (axes[0][sel[0]] - ctr[0])[:, None, None]
            dy = (axes[1][sel[1]] - ctr[1])[None, :, None]
            dz = (axes[2][sel[2]] - ctr[2])[None, None, :]
            inside = np.sqrt(dx * dx + dy * dy + dz * dz) <= rad
            sub = cells[np.ix_(*sel)]
            cells[np.ix_(*sel)] = sub | inside
        else:
            raise TypeError(f"unsupported primitive {type(prim).__name__}")
    return OccupancyGrid(spec, cells)


def edt(occ: OccupancyGrid, max_distance: float = DEFAULT_MAX_DISTANCE) -> DistanceGrid:
    """Exact Euclidean distance from each voxel center to the nearest occupied center.

    Values are truncated at ``max_distance``. A grid without occupied voxels
    maps to ``max_distance`` everywhere.
    """
    if not max_distance > 0:
        raise DomainError(f"max_distance must be positive, got {max_distance}")
    if not occ.cells.any():
        values = np.full(occ.spec.dims, float(max_distance))
    else:
        values = ndimage.distance_transform_edt(~occ.cells, sampling=occ.spec.resolution)
        np.minimum(values, max_distance, out=values)
    return DistanceGrid(occ.spec, values, float(max_distance))


def lookup(
    grid: DistanceGrid,
    p,
    mode: LookupMode = LookupMode.CONSERVATIVE,
    out_of_bounds: OutOfBounds = OutOfBounds.TREAT_FREE,
) -> float:
    """Distance stored for the voxel containing ``p``.

    ``CONSERVATIVE`` subtracts the voxel half-diagonal so the result lower
    bounds the distance from any point of the voxel to the nearest occupied
    voxel center.
    """
    idx = grid.spec.index_of(p)
    if idx is None:
        return grid.max_distance if out_of_bounds is OutOfBounds.TREAT_FREE else 0.0
    v = float(grid.values[idx])
    if mode is LookupMode.CONSERVATIVE:
        return max(0.0, v - grid.spec.half_diagonal)
    return v


class VoxelField:
    """Distance field backed by a :class:`DistanceGrid`."""

    def __init__(
        self,
        grid: DistanceGrid,
        mode: LookupMode = LookupMode.CONSERVATIVE,
        out_of_bounds: OutOfBounds = OutOfBounds.TREAT_FREE,
    ):
        self.grid = grid
        self.mode = LookupMode(mode)
        self.out_of_bounds = OutOfBounds(out_of_bounds)
        self._queries = {}

    def __repr__(self):
        return f"VoxelField(dims={self.grid.spec.dims}, res={self.grid.spec.resolution}, mode={self.mode.value})"

    def query_fn(self, mode: LookupMode | None = None):
        """Return a fast ``p -> distance`` callable for the given lookup mode."""
        mode = self.mode if mode is None else LookupMode(mode)
        fn = self._queries.get(mode)
        if fn is None:
            fn = self._queries[mode] = self._build_query(mode)
        return fn

    def _build_query(self, mode: LookupMode):
        spec = self.grid.spec
        ox, oy, oz = spec.origin
        h = spec.resolution
        nx, ny, nz = spec.dims
        values = self.grid.values
        offset = spec.half_diagonal if mode is LookupMode.CONSERVATIVE else 0.0
        oob = self.grid.max_distance if self.out_of_bounds is OutOfBounds.TREAT_FREE else 0.0
        floor = math.floor

        def query(p) -> float:
            i = floor((p[0] - ox) / h)
            j = floor((p[1] - oy) / h)
            k = floor((p[2] - oz) / h)
            if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
                v = values[i, j, k]
                return float(v - offset) if v > offset else 0.0
            return oob

        return query

    def distance(self, p) -> float:
        return self.query_fn()(p)

    def distances(self, points: np.ndarray, mode: LookupMode | None = None) -> np.ndarray:
        mode = self.mode if mode is None else LookupMode(mode)
        idx, inside = self.grid.spec.indices_of(points)
        oob = self.grid.max_distance if self.out_of_bounds is OutOfBounds.TREAT_FREE else 0.0
        out = np.full(len(idx), oob, dtype=float)
        ii = idx[inside]
        out[inside] = self.grid.values[ii[:, 0], ii[:, 1], ii[:, 2]]
        if mode is LookupMode.CONSERVATIVE:
            out[inside] = np.maximum(out[inside] - self.grid.spec.half_diagonal, 0.0)
        return out
