"""Capsule collision checks against a distance field.

Three strategies decide whether a capsule (segment plus radius ``r``) is free:

* :func:`check_uni` walks the axis from the start point. A query at arc length
  ``a`` with distance ``d > r`` proves the open interval ``(a - s, a + s)``
  free, ``s = sqrt(d**2 - r**2)``, so the walk jumps straight to ``a + s``.
* :func:`check_bi` keeps a FIFO queue of unverified intervals, shrinks each
  from both ends and splits the remainder at a midpoint query.
* :func:`check_fixed` is the sphere-decomposition baseline: spheres at fixed
  spacing, inflated so neighbouring spheres meet in a circle of radius ``r``.

:func:`oracle_check` samples the axis densely and is the reference verdict.

A field is any object with ``distance(p) -> float``; fields that support
several lookup modes also expose ``query_fn(mode)``.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DomainError, NonTerminationError
from .field.grid import LookupMode
from .geometry import Capsule


class DistanceField(Protocol):
    def distance(self, p) -> float: ...


class Verdict(enum.Enum):
    COLLISION = "collision"
    FREE = "free"


class SafetyKind(enum.Enum):
    NONE = "none"
    SUBTRACT_FROM_DISTANCE = "distance"
    ADD_TO_RADIUS = "radius"


@dataclass(frozen=True)
class SafetyMode:
    """How a safety distance ``d_s`` is folded into the distance/radius pair."""

    kind: SafetyKind = SafetyKind.ADD_TO_RADIUS
    d_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SafetyKind(self.kind))
        if not (math.isfinite(self.d_s) and self.d_s >= 0.0):
            raise DomainError(f"safety distance must be >= 0, got {self.d_s}")
        if self.kind is SafetyKind.NONE and self.d_s != 0.0:
            raise DomainError("SafetyKind.NONE takes no safety distance")

    @classmethod
    def none(cls) -> "SafetyMode":
        return cls(SafetyKind.NONE, 0.0)

    @classmethod
    def subtract_from_distance(cls, d_s: float) -> "SafetyMode":
        return cls(SafetyKind.SUBTRACT_FROM_DISTANCE, d_s)

    @classmethod
    def add_to_radius(cls, d_s: float) -> "SafetyMode":
        return cls(SafetyKind.ADD_TO_RADIUS, d_s)

    def label(self) -> str:
        if self.kind is SafetyKind.NONE:
            return "none"
        return f"{self.kind.value}:{self.d_s!r}"


@dataclass(frozen=True)
class CheckParams:
    lookup_mode: LookupMode = LookupMode.CONSERVATIVE
    safety: SafetyMode = field(default_factory=SafetyMode)
    collision_margin: float = 0.0
    max_queries: int = 1_000_000
    trace: bool = False
    skip_duplicate_end_query: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lookup_mode", LookupMode(self.lookup_mode))
        if not (math.isfinite(self.collision_margin) and self.collision_margin >= 0.0):
            raise DomainError(f"collision_margin must be >= 0, got {self.collision_margin}")
        if int(self.max_queries) < 1:
            raise DomainError(f"max_queries must be positive, got {self.max_queries}")


@dataclass(frozen=True)
class CheckReport:
    verdict: Verdict
    queries: int
    effective_radius: float
    queried_alphas: tuple[float, ...] | None = None

    @property
    def collision(self) -> bool:
        return self.verdict is Verdict.COLLISION


@dataclass(frozen=True)
class SphereDecomposition:
    centers: tuple[float, ...]
    sphere_radius: float
    separation: float


@dataclass(frozen=True)
class OracleResult:
    verdict: Verdict
    min_clearance: float
    samples: int

    @property
    def collision(self) -> bool:
        return self.verdict is Verdict.COLLISION


def step_length(d: float, r_eff: float) -> float:
    """Half-width of the interval proven free by a query with distance ``d``."""
    if not d > r_eff:
        raise DomainError(f"step_length needs d > r_eff (d={d}, r_eff={r_eff})")
    # (d - r)(d + r) keeps precision when d is close to r
    return math.sqrt((d - r_eff) * (d + r_eff))


def effective_pair(d: float, r: float, safety: SafetyMode) -> tuple[float, float]:
    """Apply a safety distance to a measured distance and link radius."""
    kind = safety.kind
    if kind is SafetyKind.ADD_TO_RADIUS:
        return d, r + safety.d_s
    if kind is SafetyKind.SUBTRACT_FROM_DISTANCE:
        return d - safety.d_s, r
    return d, r


def _query_fn(field, params: CheckParams):
    qf = getattr(field, "query_fn", None)
    if qf is not None:
        return qf(params.lookup_mode)
    return field.distance


def _distance_transform(params: CheckParams):
    """Return ``(distance offset, radius offset)`` implementing the safety mode."""
    s = params.safety
    if s.kind is SafetyKind.ADD_TO_RADIUS:
        return 0.0, s.d_s
    if s.kind is SafetyKind.SUBTRACT_FROM_DISTANCE:
        return s.d_s, 0.0
    return 0.0, 0.0


def check_uni(capsule: Capsule, field: DistanceField, params: CheckParams = CheckParams()) -> CheckReport:
    """Uni-directional search from the start point towards the end point.

    Queries ``d(alpha)`` at ``alpha = 0`` and keeps stepping by
    ``sqrt(d_eff**2 - r_eff**2)`` while ``alpha <= l``; a final query at
    ``alpha = l`` covers the end cap. Any query with
    ``d_eff <= r_eff + collision_margin`` reports a collision.
    """
    query = _query_fn(field, params)
    d_off, r_off = _distance_transform(params)
    r_eff = capsule.radius + r_off
    threshold = r_eff + params.collision_margin
    axis = capsule.axis
    length = axis.length
    sx, sy, sz = axis.start
    tx, ty, tz = axis.direction
    budget = params.max_queries
    trace = [] if params.trace else None

    queries = 0
    alpha = 0.0
    last = -1.0
    while alpha <= length:
        if queries >= budget:
            raise NonTerminationError(
                f"uni-directional check exceeded {budget} queries at alpha={alpha!r}", queries
            )
        if alpha == length:
            p = axis.end
        else:
            p = (sx + alpha * tx, sy + alpha * ty, sz + alpha * tz)
        d = query(p) - d_off
        queries += 1
        last = alpha
        if trace is not None:
            trace.append(alpha)
        if d <= threshold:
            return CheckReport(Verdict.COLLISION, queries, r_eff, _tup(trace))
        alpha += math.sqrt((d - r_eff) * (d + r_eff))

    if not (params.skip_duplicate_end_query and last == length):
        d = query(axis.end) - d_off
        queries += 1
        if trace is not None:
            trace.append(length)
        if d <= threshold:
            return CheckReport(Verdict.COLLISION, queries, r_eff, _tup(trace))
    return CheckReport(Verdict.FREE, queries, r_eff, _tup(trace))


def check_bi(capsule: Capsule, field: DistanceField, params: CheckParams = CheckParams()) -> CheckReport:
    """Bi-directional search over a FIFO queue of unverified intervals.

    Each interval ``[a, b]`` is shrunk from both ends by the free steps of
    ``d(a)`` and ``d(b)``. If a gap ``[a', b']`` remains, its midpoint ``m``
    is queried; the free span around ``m`` splits the gap into
    ``[a', m - s_m]`` and ``[m + s_m, b']``, each enqueued only when
    non-empty.
    """
    query = _query_fn(field, params)
    d_off, r_off = _distance_transform(params)
    r_eff = capsule.radius + r_off
    threshold = r_eff + params.collision_margin
    axis = capsule.axis
    length = axis.length
    sx, sy, sz = axis.start
    tx, ty, tz = axis.direction
    end = axis.end
    budget = params.max_queries
    trace = [] if params.trace else None
    sqrt = math.sqrt
    queries = 0

    def at(alpha):
        if alpha == length:
            return end
        return (sx + alpha * tx, sy + alpha * ty, sz + alpha * tz)

    queue = deque([(0.0, length)])
    while queue:
        lo, hi = queue.popleft()
        if queries + 2 > budget:
            raise NonTerminationError(
                f"bi-directional check exceeded {budget} queries on [{lo!r}, {hi!r}]", queries
            )
        d_lo = query(at(lo)) - d_off
        queries += 1
        if trace is not None:
            trace.append(lo)
        if d_lo <= threshold:
            return CheckReport(Verdict.COLLISION, queries, r_eff, _tup(trace))
        d_hi = query(at(hi)) - d_off
        queries += 1
        if trace is not None:
            trace.append(hi)
        if d_hi <= threshold:
            return CheckReport(Verdict.COLLISION, queries, r_eff, _tup(trace))

        lo_bar = lo + sqrt((d_lo - r_eff) * (d_lo + r_eff))
        hi_bar = hi - sqrt((d_hi - r_eff) * (d_hi + r_eff))
        if lo_bar < hi_bar:
            mid = 0.5 * (lo_bar + hi_bar)
            if queries >= budget:
                raise NonTerminationError(
                    f"bi-directional check exceeded {budget} queries at alpha={mid!r}", queries
                )
            d_mid = query(at(mid)) - d_off
            queries += 1
            if trace is not None:
                trace.append(mid)
            if d_mid <= threshold:
                return CheckReport(Verdict.COLLISION, queries, r_eff, _tup(trace))
            s_mid = sqrt((d_mid - r_eff) * (d_mid + r_eff))
            mid_lo = mid - s_mid
            mid_hi = mid + s_mid
            if lo_bar < mid_lo:
                queue.append((lo_bar, mid_lo))
            if mid_hi < hi_bar:
                queue.append((mid_hi, hi_bar))
    return CheckReport(Verdict.FREE, queries, r_eff, _tup(trace))


def decompose(capsule: Capsule, separation: float) -> SphereDecomposition:
    """Cover the capsule with equally spaced spheres, both ends included.

    The spacing is snapped to ``l / n`` with ``n = ceil(l / separation)`` and
    the sphere radius grows to ``sqrt(r**2 + (spacing / 2)**2)``, so adjacent
    spheres intersect exactly in a disk of radius ``r``.
    """
    if not (math.isfinite(separation) and separation > 0.0):
        raise DomainError(f"sphere separation must be positive, got {separation}")
    length = capsule.axis.length
    # round() absorbs float noise such as 2.1 / 0.3 = 7.000000000000001
    n = max(1, math.ceil(round(length / separation, 9)))
    spacing = length / n
    centers = tuple(k * spacing for k in range(n)) + (length,)
    radius = math.sqrt(capsule.radius**2 + (0.5 * spacing) ** 2)
    return SphereDecomposition(centers, radius, spacing)


def check_fixed(
    capsule: Capsule,
    field: DistanceField,
    separation: float,
    params: CheckParams = CheckParams(),
    decomposition: SphereDecomposition | None = None,
) -> CheckReport:
    """Sphere-decomposition baseline, stopping at the first colliding sphere."""
    dec = decomposition if decomposition is not None else decompose(capsule, separation)
    query = _query_fn(field, params)
    d_off, r_off = _distance_transform(params)
    r_eff = dec.sphere_radius + r_off
    threshold = r_eff + params.collision_margin
    axis = capsule.axis
    length = axis.length
    sx, sy, sz = axis.start
    tx, ty, tz = axis.direction
    queries = 0
    for alpha in dec.centers:
        p = axis.end if alpha == length else (sx + alpha * tx, sy + alpha * ty, sz + alpha * tz)
        queries += 1
        if query(p) - d_off <= threshold:
            return CheckReport(
                Verdict.COLLISION, queries, r_eff, dec.centers[:queries] if params.trace else None
            )
    return CheckReport(Verdict.FREE, queries, r_eff, dec.centers if params.trace else None)


def oracle_alphas(length: float, step: float) -> np.ndarray:
    """``0, step, 2*step, ...`` up to ``length``, with ``length`` always last."""
    if not (math.isfinite(step) and step > 0.0):
        raise DomainError(f"oracle step must be positive, got {step}")
    n = int(math.floor(length / step))
    alphas = np.arange(n + 1, dtype=float) * step
    # drop float-noise near-duplicates of the end, e.g. 3 * 0.3 < 0.9
    alphas = alphas[alphas < length - 1e-9 * step]
    return np.append(alphas, length)


def oracle_check(
    capsule: Capsule,
    field: DistanceField,
    step: float,
    params: CheckParams = CheckParams(),
) -> OracleResult:
    """Dense-sampling reference: collision iff some sample has ``d_eff <= r_eff``."""
    alphas = oracle_alphas(capsule.axis.length, step)
    axis = capsule.axis
    pts = np.asarray(axis.start) + alphas[:, None] * np.asarray(axis.direction)
    pts[-1] = axis.end
    batch = getattr(field, "distances", None)
    if batch is not None:
        d = batch(pts, params.lookup_mode)
    else:
        query = _query_fn(field, params)
        d = np.array([query(tuple(p)) for p in pts])
    d_off, r_off = _distance_transform(params)
    clearance = (d - d_off) - (capsule.radius + r_off)
    min_clearance = float(clearance.min())
    verdict = Verdict.COLLISION if min_clearance <= 0.0 else Verdict.FREE
    return OracleResult(verdict, min_clearance, len(alphas))


def _tup(trace):
    return None if trace is None else tuple(trace)
