"""Serial-chain forward kinematics producing link capsules.

A :class:`ChainModel` is a list of joints, each with a fixed offset from the
previous frame followed by its own motion (rotation about or translation
along a unit axis). Frame 0 is the world frame; frame ``k`` is the frame after
joint ``k - 1`` has moved. Collision links connect the origins of two frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError
from .geometry import Capsule, LinkAxis

CRANE_FIXTURE = "crane7.json"


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit ``axis``."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return (
        rotation_about((0.0, 0.0, 1.0), yaw)
        @ rotation_about((0.0, 1.0, 0.0), pitch)
        @ rotation_about((1.0, 0.0, 0.0), roll)
    )


def _transform(rotation: np.ndarray, translation) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


def _unit(v) -> tuple[float, float, float]:
    a = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(a))
    if a.shape != (3,) or not n > 0:
        raise DomainError(f"joint axis must be a nonzero 3-vector, got {v}")
    return tuple(float(c) for c in a / n)


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str  # "revolute" | "prismatic"
    axis: tuple[float, float, float]
    limits: tuple[float, float]
    origin_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise DomainError(f"joint {self.name}: unknown kind {self.kind!r}")
        object.__setattr__(self, "axis", _unit(self.axis))
        lo, hi = (float(v) for v in self.limits)
        if not lo < hi:
            raise DomainError(f"joint {self.name}: limits {self.limits} need lo < hi")
        object.__setattr__(self, "limits", (lo, hi))
        object.__setattr__(self, "origin_xyz", tuple(float(v) for v in self.origin_xyz))
        object.__setattr__(self, "origin_rpy", tuple(float(v) for v in self.origin_rpy))

    @property
    def offset(self) -> np.ndarray:
        return _transform(rpy_matrix(*self.origin_rpy), self.origin_xyz)

    def motion(self, q: float) -> np.ndarray:
        if self.kind == "revolute":
            return _transform(rotation_about(self.axis, q), (0.0, 0.0, 0.0))
        return _transform(np.eye(3), np.asarray(self.axis) * q)


@dataclass(frozen=True)
class CollisionLink:
    """Capsule between the origins of ``start_frame`` and ``end_frame``.

    A telescopic link names the prismatic joint that extends it; its length
    is then ``base_length + q[length_extension_joint]``.
    """

    name: str
    start_frame: int
    end_frame: int
    radius: float
    length_extension_joint: int | None = None
    base_length: float | None = None

    def __post_init__(self):
        if not self.start_frame < self.end_frame:
            raise DomainError(f"link {self.name}: frame indices must increase")
        if not self.radius > 0:
            raise DomainError(f"link {self.name}: radius must be positive")
        if (self.length_extension_joint is None) != (self.base_length is None):
            raise DomainError(f"link {self.name}: extension joint and base_length go together")


@dataclass(frozen=True)
class ChainModel:
    joints: tuple[JointSpec, ...]
    collision_links: tuple[CollisionLink, ...]
    name: str = "chain"
    notes: str = ""
    _offsets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "collision_links", tuple(self.collision_links))
        n = len(self.joints)
        for link in self.collision_links:
            if link.end_frame > n:
                raise DomainError(f"link {link.name}: frame {link.end_frame} beyond {n} joints")
            ext = link.length_extension_joint
            if ext is not None and (ext >= n or self.joints[ext].kind != "prismatic"):
                raise DomainError(f"link {link.name}: extension joint {ext} is not prismatic")
        object.__setattr__(self, "_offsets", tuple(j.offset for j in self.joints))

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def link_index(self, name: str) -> int:
        for i, link in enumerate(self.collision_links):
            if link.name == name:
                return i
        raise KeyError(name)

    def telescopic_link(self) -> int:
        """Index of the first collision link with an extension joint."""
        for i, link in enumerate(self.collision_links):
            if link.length_extension_joint is not None:
                return i
        raise DomainError(f"model {self.name} has no telescopic link")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "notes": self.notes,
            "joints": [
                {
                    "name": j.name,
                    "type": j.kind,
                    "axis": list(j.axis),
                    "origin": {"xyz": list(j.origin_xyz), "rpy": list(j.origin_rpy)},
                    "limits": list(j.limits),
                }
                for j in self.joints
            ],
            "collision_links": [
                {
                    k: v
                    for k, v in (
                        ("name", link.name),
                        ("start_frame", link.start_frame),
                        ("end_frame", link.end_frame),
                        ("radius", link.radius),
                        ("length_extension_joint", link.length_extension_joint),
                        ("base_length", link.base_length),
                    )
                    if v is not None
                }
                for link in self.collision_links
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChainModel":
        try:
            joints = [
                JointSpec(
                    name=j.get("name", f"q{i + 1}"),
                    kind=j["type"],
                    axis=j["axis"],
                    limits=tuple(j["limits"]),
                    origin_xyz=tuple(j.get("origin", {}).get("xyz", (0.0, 0.0, 0.0))),
                    origin_rpy=tuple(j.get("origin", {}).get("rpy", (0.0, 0.0, 0.0))),
                )
                for i, j in enumerate(doc["joints"])
            ]
            links = [
                CollisionLink(
                    name=c.get("name", f"link{i + 1}"),
                    start_frame=int(c["start_frame"]),
                    end_frame=int(c["end_frame"]),
                    radius=float(c["radius"]),
                    length_extension_joint=c.get("length_extension_joint"),
                    base_length=c.get("base_length"),
                )
                for i, c in enumerate(doc["collision_links"])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise InputError(f"malformed chain model: {exc!r}") from exc
        model = cls(tuple(joints), tuple(links), doc.get("name", "chain"), doc.get("notes", ""))
        _check_base_lengths(model)
        return model


def _check_base_lengths(model: ChainModel) -> None:
    q = np.clip(np.zeros(model.dof), model.lower, model.upper)
    frames = frame_origins(model, q)
    for link in model.collision_links:
        if link.base_length is None:
            continue
        measured = float(np.linalg.norm(frames[link.end_frame] - frames[link.start_frame]))
        expected = link.base_length + q[link.length_extension_joint]
        if abs(measured - expected) > 1e-9:
            raise InputError(
                f"link {link.name}: base_length {link.base_length} disagrees with the "
                f"kinematic chain ({measured - q[link.length_extension_joint]})"
            )


def load_model(path=None) -> ChainModel:
    """Load a chain fixture.

    Without a path, or with the bare name ``crane7.json`` when no such file
    exists locally, the bundled crane fixture is used.
    """
    if path is None or (str(path) == CRANE_FIXTURE and not Path(path).exists()):
        text = resources.files("edfcap.data").joinpath(CRANE_FIXTURE).read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path or CRANE_FIXTURE}: invalid JSON: {exc}") from exc
    return ChainModel.from_dict(doc)


def check_limits(model: ChainModel, q: Sequence[float]) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise DomainError(f"configuration has {q.size} values, model has {model.dof} joints")
    bad = [
        f"{j.name}={v!r} not in [{j.limits[0]!r}, {j.limits[1]!r}]"
        for j, v in zip(model.joints, q)
        if not (j.limits[0] <= v <= j.limits[1])
    ]
    if bad:
        raise DomainError("configuration outside joint limits: " + "; ".join(bad))
    return q


def frame_origins(model: ChainModel, q: Sequence[float]) -> np.ndarray:
    """World positions of frames ``0..dof`` as a ``(dof + 1, 3)`` array."""
    T = np.eye(4)
    out = np.empty((model.dof + 1, 3))
    out[0] = T[:3, 3]
    for k, (joint, offset) in enumerate(zip(model.joints, model._offsets)):
        T = T @ offset @ joint.motion(q[k])
        out[k + 1] = T[:3, 3]
    return out


def forward(
    model: ChainModel,
    q: Sequence[float],
    length_overrides: dict[int, float] | None = None,
    radius_overrides: dict[int, float] | None = None,
) -> list[Capsule]:
    """World-frame capsules of all collision links for configuration ``q``.

    ``length_overrides`` forces a link's length (keeping its start point and
    direction); ``radius_overrides`` replaces its radius. Both are keyed by
    collision-link index.
    """
    q = check_limits(model, q)
    frames = frame_origins(model, q)
    capsules = []
    for i, link in enumerate(model.collision_links):
        start = frames[link.start_frame]
        end = frames[link.end_frame]
        radius = link.radius
        length = None
        if link.length_extension_joint is not None:
            length = link.base_length + float(q[link.length_extension_joint])
        if length_overrides and i in length_overrides:
            length = float(length_overrides[i])
        if radius_overrides and i in radius_overrides:
            radius = float(radius_overrides[i])
        if length is None:
            capsules.append(Capsule(LinkAxis(tuple(start), tuple(end)), radius))
        else:
            capsules.append(Capsule(LinkAxis.from_direction(tuple(start), tuple(end - start), length), radius))
    return capsules


def sample_configuration(model: ChainModel, seed: int, index: int = 0) -> np.ndarray:
    """Uniform sample within joint limits, a pure function of ``(seed, index)``."""
    rng = np.random.default_rng([int(seed), int(index)])
    lo, hi = model.lower, model.upper
    return lo + (hi - lo) * rng.random(model.dof)
