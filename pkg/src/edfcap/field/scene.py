"""Obstacle scenes and their exact (analytic) distance field."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DomainError, InputError
from ..geometry import Box, ScenePrimitive, Sphere, dist_point_primitive, primitive_intersects_box

DEFAULT_SENTINEL = 1e9


@dataclass(frozen=True)
class Scene:
    primitives: tuple[ScenePrimitive, ...]
    bounds: Box

    def __post_init__(self):
        prims = tuple(self.primitives)
        for n, prim in enumerate(prims):
            if not isinstance(prim, (Sphere, Box)):
                raise TypeError(f"primitive {n}: unsupported type {type(prim).__name__}")
            if not primitive_intersects_box(prim, self.bounds):
                raise DomainError(f"primitive {n} ({prim}) lies outside the scene bounds")
        object.__setattr__(self, "primitives", prims)

    def to_dict(self) -> dict:
        prims = []
        for prim in self.primitives:
            if isinstance(prim, Sphere):
                prims.append({"type": "sphere", "center": list(prim.center), "radius": prim.radius})
            else:
                prims.append({"type": "box", "min": list(prim.min), "max": list(prim.max)})
        return {
            "bounds": {"min": list(self.bounds.min), "max": list(self.bounds.max)},
            "primitives": prims,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scene":
        try:
            bounds = Box(doc["bounds"]["min"], doc["bounds"]["max"])
            prims = []
            for entry in doc.get("primitives", []):
                kind = entry["type"]
                if kind == "sphere":
                    prims.append(Sphere(entry["center"], float(entry["radius"])))
                elif kind == "box":
                    prims.append(Box(entry["min"], entry["max"]))
                else:
                    raise InputError(f"unknown primitive type {kind!r}")
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed scene document: {exc!r}") from exc
        return cls(tuple(prims), bounds)


def load_scene(path) -> Scene:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from exc
    return Scene.from_dict(doc)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


def analytic_distance(scene: Scene, p, sentinel: float = DEFAULT_SENTINEL) -> float:
    """Exact distance from ``p`` to the nearest primitive, ``sentinel`` if none."""
    if not scene.primitives:
        return sentinel
    return min(dist_point_primitive(p, prim) for prim in scene.primitives)


# below this many primitives a linear scan beats the cell lookup
_MIN_PRUNED_PRIMITIVES = 8


class AnalyticField:
    """Exact continuous distance field over a :class:`Scene`.

    Single-point queries go through a coarse cell grid over the scene bounds:
    each cell keeps only the primitives that can be nearest to some point of
    the cell (lower bound <= smallest upper bound), so the result is
    identical to :func:`analytic_distance`. :meth:`distances` evaluates every
    primitive with numpy and does not use the cell grid.
    """

    def __init__(self, scene: Scene, sentinel: float = DEFAULT_SENTINEL, cells_per_axis: int = 32):
        self.scene = scene
        self.sentinel = float(sentinel)
        spheres = [p for p in scene.primitives if isinstance(p, Sphere)]
        boxes = [p for p in scene.primitives if isinstance(p, Box)]
        self._centers = np.array([s.center for s in spheres], dtype=float).reshape(-1, 3)
        self._radii = np.array([s.radius for s in spheres], dtype=float)
        self._lo = np.array([b.min for b in boxes], dtype=float).reshape(-1, 3)
        self._hi = np.array([b.max for b in boxes], dtype=float).reshape(-1, 3)
        self._all = (
            tuple((*s.center, s.radius) for s in spheres),
            tuple((*b.min, *b.max) for b in boxes),
        )
        self._build_cells(max(1, int(cells_per_axis)))

    def __repr__(self):
        return f"AnalyticField({len(self.scene.primitives)} primitives)"

    def _build_cells(self, cells_per_axis: int) -> None:
        b = self.scene.bounds
        lo = np.asarray(b.min)
        ext = np.asarray(b.max) - lo
        size = float(ext.max()) / cells_per_axis
        dims = np.maximum(1, np.ceil(ext / size).astype(int))
        self._cell_origin = tuple(lo)
        self._cell_size = size
        self._cell_dims = tuple(int(n) for n in dims)
        self._cells = None
        if len(self.scene.primitives) <= _MIN_PRUNED_PRIMITIVES:
            return
        idx = np.stack(np.meshgrid(*(np.arange(n) for n in dims), indexing="ij"), -1).reshape(-1, 3)
        c_lo = lo + idx * size
        c_hi = c_lo + size
        corners = np.stack(
            [np.where(np.array(m, bool), c_hi, c_lo) for m in np.ndindex(2, 2, 2)], axis=1
        )  # (cells, 8, 3)
        mins, maxs = [], []
        if len(self._radii):
            gap = np.maximum(np.maximum(c_lo[:, None] - self._centers, self._centers - c_hi[:, None]), 0)
            mins.append(np.maximum(np.linalg.norm(gap, axis=2) - self._radii, 0))
            far = np.linalg.norm(corners[:, :, None] - self._centers[None, None], axis=3).max(axis=1)
            maxs.append(np.maximum(far - self._radii, 0))
        if len(self._lo):
            gap = np.maximum(np.maximum(self._lo - c_hi[:, None], c_lo[:, None] - self._hi), 0)
            mins.append(np.linalg.norm(gap, axis=2))
            g = np.maximum(np.maximum(self._lo[None, None] - corners[:, :, None], corners[:, :, None] - self._hi[None, None]), 0)
            maxs.append(np.linalg.norm(g, axis=3).max(axis=1))
        lower = np.concatenate(mins, axis=1)
        upper = np.concatenate(maxs, axis=1).min(axis=1)
        # slack keeps the pruning safe against rounding in the bounds themselves
        keep = lower <= (upper + 1e-9 * (1.0 + upper))[:, None]
        n_sph = len(self._radii)
        sph, box = self._all
        # neighbouring cells mostly keep the same candidates; share their tuples
        patterns, inverse = np.unique(keep, axis=0, return_inverse=True)
        shared = []
        for row in patterns:
            hits = np.flatnonzero(row)
            shared.append(
                (tuple(sph[i] for i in hits if i < n_sph), tuple(box[i - n_sph] for i in hits if i >= n_sph))
            )
        self._cells = [shared[i] for i in inverse.reshape(-1)]

    def query_fn(self, mode=None):
        # lookup modes only apply to voxel fields
        return self.distance

    def distance(self, p) -> float:
        x, y, z = p[0], p[1], p[2]
        spheres, boxes = self._all
        if self._cells is not None:
            ox, oy, oz = self._cell_origin
            h = self._cell_size
            nx, ny, nz = self._cell_dims
            i = math.floor((x - ox) / h)
            j = math.floor((y - oy) / h)
            k = math.floor((z - oz) / h)
            if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
                spheres, boxes = self._cells[(i * ny + j) * nz + k]
        best = self.sentinel
        for cx, cy, cz, r in spheres:
            dx, dy, dz = x - cx, y - cy, z - cz
            d = math.sqrt(dx * dx + dy * dy + dz * dz) - r
            if d < best:
                best = d
        for lx, ly, lz, hx, hy, hz in boxes:
            dx = max(lx - x, 0.0, x - hx)
            dy = max(ly - y, 0.0, y - hy)
            dz = max(lz - z, 0.0, z - hz)
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d < best:
                best = d
        return best if best > 0.0 else 0.0

    def distances(self, points: np.ndarray, mode=None) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(pts) > 4096:
            return np.concatenate([self.distances(pts[i : i + 4096]) for i in range(0, len(pts), 4096)])
        best = np.full(len(pts), self.sentinel)
        if len(self._radii):
            d = pts[:, None, :] - self._centers[None, :, :]
            ds = np.sqrt(np.einsum("nij,nij->ni", d, d)) - self._radii[None, :]
            best = np.minimum(best, np.maximum(ds.min(axis=1), 0.0))
        if len(self._lo):
            g = np.maximum(np.maximum(self._lo[None] - pts[:, None], pts[:, None] - self._hi[None]), 0.0)
            best = np.minimum(best, np.sqrt(np.einsum("nij,nij->ni", g, g).min(axis=1)))
        return best
