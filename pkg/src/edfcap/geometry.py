"""Geometric primitives: points, link axes, capsules and scene obstacles.

Points are plain 3-tuples (:class:`Point3`) so the collision loops can build
thousands of them per second without numpy overhead. Distances to scene
primitives are unsigned: a point inside an obstacle is at distance 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union

from .errors import DomainError


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, xyz: Iterable[float]) -> "Point3":
        """Build a validated point from any 3-element iterable."""
        vals = tuple(float(v) for v in xyz)
        if len(vals) != 3:
            raise DomainError(f"expected 3 coordinates, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite coordinate in {vals}")
        return cls(*vals)


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _norm(v) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@dataclass(frozen=True)
class LinkAxis:
    """Central axis of a link, the segment from ``start`` to ``end``.

    ``length`` and the unit ``direction`` are derived at construction.
    A zero-length axis is rejected because its direction is undefined.
    """

    start: Point3
    end: Point3
    length: float = field(init=False)
    direction: Point3 = field(init=False)

    def __post_init__(self):
        start = Point3.of(self.start)
        end = Point3.of(self.end)
        diff = _sub(end, start)
        length = _norm(diff)
        if not length > 0.0:
            raise DomainError("degenerate link axis: start and end coincide")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "length", length)
        object.__setattr__(
            self, "direction", Point3(diff[0] / length, diff[1] / length, diff[2] / length)
        )

    @classmethod
    def from_direction(cls, start, direction, length: float) -> "LinkAxis":
        """Axis starting at ``start`` and running ``length`` along ``direction``."""
        s = Point3.of(start)
        t = Point3.of(direction)
        n = _norm(t)
        if not n > 0.0:
            raise DomainError("zero direction vector")
        if not length > 0.0:
            raise DomainError(f"link length must be positive, got {length}")
        u = Point3(t[0] / n, t[1] / n, t[2] / n)
        axis = cls(s, (s[0] + length * u[0], s[1] + length * u[1], s[2] + length * u[2]))
        # keep the requested length exactly instead of re-deriving it from the end point
        object.__setattr__(axis, "length", float(length))
        object.__setattr__(axis, "direction", u)
        return axis


@dataclass(frozen=True)
class Capsule:
    """All points within ``radius`` of a link axis."""

    axis: LinkAxis
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise DomainError(f"capsule radius must be positive, got {self.radius}")

    @classmethod
    def between(cls, start, end, radius: float) -> "Capsule":
        return cls(LinkAxis(Point3.of(start), Point3.of(end)), float(radius))

    @property
    def length(self) -> float:
        return self.axis.length


@dataclass(frozen=True)
class Sphere:
    center: Point3
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point3.of(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise DomainError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with ``min < max`` on every axis."""

    min: Point3
    max: Point3

    def __post_init__(self):
        lo = Point3.of(self.min)
        hi = Point3.of(self.max)
        if not all(a < b for a, b in zip(lo, hi)):
            raise DomainError(f"box min {lo} must be below max {hi} on every axis")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> tuple[float, float, float]:
        return (self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2])


ScenePrimitive = Union[Sphere, Box]


def axis_point(axis: LinkAxis, alpha: float) -> Point3:
    """Point at arc length ``alpha`` along the axis, ``0 <= alpha <= length``."""
    if not 0.0 <= alpha <= axis.length:
        raise DomainError(f"alpha={alpha} outside [0, {axis.length}]")
    if alpha == axis.length:
        return axis.end
    s, t = axis.start, axis.direction
    return Point3(s[0] + alpha * t[0], s[1] + alpha * t[1], s[2] + alpha * t[2])


def dist_point_segment(p, axis: LinkAxis) -> float:
    """Exact distance from ``p`` to the closed segment of ``axis``."""
    s, t = axis.start, axis.direction
    w = _sub(p, s)
    proj = w[0] * t[0] + w[1] * t[1] + w[2] * t[2]
    proj = min(max(proj, 0.0), axis.length)
    foot = (s[0] + proj * t[0], s[1] + proj * t[1], s[2] + proj * t[2])
    return _norm(_sub(p, foot))


def dist_point_primitive(p, prim: ScenePrimitive) -> float:
    """Unsigned distance from ``p`` to a sphere or box (0 inside)."""
    if isinstance(prim, Sphere):
        c = prim.center
        dx, dy, dz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
        return max(0.0, math.sqrt(dx * dx + dy * dy + dz * dz) - prim.radius)
    if isinstance(prim, Box):
        lo, hi = prim.min, prim.max
        dx = max(lo[0] - p[0], 0.0, p[0] - hi[0])
        dy = max(lo[1] - p[1], 0.0, p[1] - hi[1])
        dz = max(lo[2] - p[2], 0.0, p[2] - hi[2])
        return math.sqrt(dx * dx + dy * dy + dz * dz)
    raise TypeError(f"unsupported primitive {type(prim).__name__}")


def primitive_aabb(prim: ScenePrimitive) -> Box:
    if isinstance(prim, Sphere):
        c, r = prim.center, prim.radius
        return Box((c[0] - r, c[1] - r, c[2] - r), (c[0] + r, c[1] + r, c[2] + r))
    return prim


def boxes_overlap(a: Box, b: Box) -> bool:
    """True when the closed boxes share at least one point."""
    return all(a.min[i] <= b.max[i] and b.min[i] <= a.max[i] for i in range(3))


def primitive_intersects_box(prim: ScenePrimitive, box: Box) -> bool:
    if isinstance(prim, Sphere):
        return dist_point_primitive(prim.center, box) <= prim.radius
    return boxes_overlap(prim, box)
