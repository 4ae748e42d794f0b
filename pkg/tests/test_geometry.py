import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edfcap.errors import DomainError
from edfcap.geometry import (
    Box,
    Capsule,
    LinkAxis,
    Point3,
    Sphere,
    axis_point,
    dist_point_primitive,
    dist_point_segment,
    primitive_intersects_box,
)

coord = st.floats(-20, 20, allow_nan=False)
point = st.tuples(coord, coord, coord)

X_AXIS = LinkAxis((0, 0, 0), (4, 0, 0))


@pytest.mark.parametrize(
    "alpha, expected",
    [(0.0, (0, 0, 0)), (4.0, (4, 0, 0)), (1.5, (1.5, 0, 0))],
)
def test_axis_point_examples(alpha, expected):
    assert axis_point(X_AXIS, alpha) == pytest.approx(expected)


def test_axis_point_end_is_exact():
    axis = LinkAxis((0.1, 0.2, 0.3), (1.7, -2.9, 3.3))
    assert axis_point(axis, axis.length) == axis.end


@pytest.mark.parametrize("alpha", [-1e-9, 4.0 + 1e-9, math.nan])
def test_axis_point_out_of_range(alpha):
    with pytest.raises(DomainError):
        axis_point(X_AXIS, alpha)


@pytest.mark.parametrize(
    "p, expected",
    [((2, 1, 0), 1.0), ((-3, 4, 0), 5.0), ((2, 0, 0), 0.0), ((7, 0, 4), 5.0)],
)
def test_dist_point_segment_examples(p, expected):
    assert dist_point_segment(p, X_AXIS) == pytest.approx(expected)


def test_dist_point_primitive_examples():
    unit = Box((-1, -1, -1), (1, 1, 1))
    assert dist_point_primitive((0, 0, 2), Sphere((0, 0, 0), 0.5)) == pytest.approx(1.5)
    assert dist_point_primitive((2, 3, 0), unit) == pytest.approx(math.sqrt(5))
    assert dist_point_primitive((0, 0, 0), unit) == 0.0
    assert dist_point_primitive((0, 0, 0.1), Sphere((0, 0, 0), 0.5)) == 0.0


def test_invalid_geometry_rejected():
    with pytest.raises(DomainError):
        LinkAxis((1, 1, 1), (1, 1, 1))
    with pytest.raises(DomainError):
        Capsule.between((0, 0, 0), (1, 0, 0), 0.0)
    with pytest.raises(DomainError):
        Sphere((0, 0, 0), -1)
    with pytest.raises(DomainError):
        Box((0, 0, 0), (1, 0, 1))
    with pytest.raises(DomainError):
        Point3.of((0, math.inf, 0))
    with pytest.raises(DomainError):
        Point3.of((0, 1))


def test_from_direction_keeps_length_exactly():
    axis = LinkAxis.from_direction((1, 2, 3), (0.3, -0.4, 1.2), 3.15 + 0.7)
    assert axis.length == 3.15 + 0.7
    assert np.linalg.norm(axis.direction) == pytest.approx(1.0)


def test_primitive_intersects_box():
    box = Box((0, 0, 0), (1, 1, 1))
    assert primitive_intersects_box(Sphere((1.5, 0.5, 0.5), 0.6), box)
    assert not primitive_intersects_box(Sphere((2, 2, 2), 0.5), box)
    assert primitive_intersects_box(Box((1, 1, 1), (2, 2, 2)), box)
    assert not primitive_intersects_box(Box((1.1, 0, 0), (2, 1, 1)), box)


def _brute_segment(p, axis, n=20001):
    a = np.linspace(0, axis.length, n)
    pts = np.asarray(axis.start) + a[:, None] * np.asarray(axis.direction)
    return np.linalg.norm(pts - np.asarray(p), axis=1).min()


@settings(max_examples=60, deadline=None)
@given(point, point, point)
def test_segment_distance_matches_sampling(a, b, p):
    if np.linalg.norm(np.subtract(a, b)) < 1e-3:
        return
    axis = LinkAxis(a, b)
    exact = dist_point_segment(p, axis)
    # sampling overestimates by at most half the sample spacing
    assert exact <= _brute_segment(p, axis) + 1e-9
    assert _brute_segment(p, axis) - exact <= axis.length / 20000 + 1e-9


@settings(max_examples=100, deadline=None)
@given(point, point, st.floats(0.05, 5))
def test_primitive_distance_is_1_lipschitz(p, q, size):
    prims = [Sphere((0.5, -1, 2), size), Box((-size, -size, 0), (size, 2 * size, size))]
    gap = math.dist(p, q)
    for prim in prims:
        assert abs(dist_point_primitive(p, prim) - dist_point_primitive(q, prim)) <= gap + 1e-9


@settings(max_examples=100, deadline=None)
@given(point, st.floats(0.05, 5))
def test_box_distance_zero_only_inside(p, size):
    box = Box((-size, -size, -size), (size, size, size))
    inside = all(-size <= c <= size for c in p)
    assert (dist_point_primitive(p, box) == 0.0) == inside
