"""Monte-Carlo benchmark harness and parameter sweeps.

All methods in a run see the identical configuration sequence (paired
design): configuration ``i`` is ``sample_configuration(model, seed, i)``, so
results do not depend on how samples are split across workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import Sequence

import numpy as np

from .collision import (
    CheckParams,
    SafetyKind,
    SafetyMode,
    check_bi,
    check_fixed,
    check_uni,
    decompose,
    oracle_check,
)
from .errors import DomainError, NonTerminationError
from .field.scene import Scene
from .geometry import Box, Sphere
from .kinematics import ChainModel, forward, sample_configuration

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scene_id",
    "seed",
    "method",
    "param",
    "samples",
    "collision_fraction",
    "mean_queries",
    "median_queries",
    "p99_queries",
    "mean_ns",
    "median_ns",
)
TIMING_COLUMNS = ("mean_ns", "median_ns")


# --------------------------------------------------------------------------
# Methods
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    kind: str  # "uni" | "bi" | "fixed" | "oracle"
    value: float | None = None  # sphere separation or oracle step

    def __post_init__(self):
        if self.kind not in ("uni", "bi", "fixed", "oracle"):
            raise DomainError(f"unknown method {self.kind!r}")
        if self.kind in ("fixed", "oracle"):
            if self.value is None or not (math.isfinite(self.value) and self.value > 0):
                raise DomainError(f"method {self.kind} needs a positive parameter, got {self.value}")
        elif self.value is not None:
            raise DomainError(f"method {self.kind} takes no parameter")

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        """Parse ``uni``, ``bi``, ``fixed:<sep>`` or ``oracle:<step>``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if not arg:
            return cls(name)
        try:
            return cls(name, float(arg))
        except ValueError:
            raise DomainError(f"bad method parameter in {text!r}") from None

    @property
    def label(self) -> str:
        return self.kind if self.value is None else f"{self.kind}:{self.value!r}"

    def check(self, capsule, field, params: CheckParams):
        """Run the method on one capsule; returns ``(collision, queries)``."""
        if self.kind == "uni":
            rep = check_uni(capsule, field, params)
        elif self.kind == "bi":
            rep = check_bi(capsule, field, params)
        elif self.kind == "fixed":
            rep = check_fixed(capsule, field, self.value, params)
        else:
            res = oracle_check(capsule, field, self.value, params)
            return res.collision, res.samples
        return rep.collision, rep.queries


def parse_methods(text: str) -> list[MethodSpec]:
    methods = [MethodSpec.parse(part) for part in text.split(",") if part.strip()]
    if not methods:
        raise DomainError("no methods given")
    return methods


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


@dataclass
class MethodStats:
    method: str
    param: str
    samples: int
    collision_fraction: float
    mean_queries: float
    median_queries: float
    p99_queries: float
    mean_ns: float
    median_ns: float
    # per-sample arrays, kept in memory only
    collisions: np.ndarray | None = field(default=None, compare=False, repr=False)
    queries: np.ndarray | None = field(default=None, compare=False, repr=False)
    times_ns: np.ndarray | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_samples(cls, method: str, param: str, collisions, queries, times_ns) -> "MethodStats":
        collisions = np.asarray(collisions, dtype=bool)
        queries = np.asarray(queries, dtype=np.int64)
        times_ns = np.asarray(times_ns, dtype=np.int64)
        n = len(collisions)
        if n == 0:
            raise DomainError("no samples")
        return cls(
            method=method,
            param=param,
            samples=n,
            collision_fraction=float(collisions.mean()),
            mean_queries=float(queries.mean()),
            median_queries=float(np.median(queries)),
            p99_queries=float(np.percentile(queries, 99)),
            mean_ns=float(times_ns.mean()),
            median_ns=float(np.median(times_ns)),
            collisions=collisions,
            queries=queries,
            times_ns=times_ns,
        )

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS if hasattr(self, k)}


@dataclass
class BenchReport:
    scene_id: str
    seed: int
    lookup_mode: str
    safety_mode: str
    rows: list[MethodStats] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def row(self, method: str, param: str = "") -> MethodStats:
        for r in self.rows:
            if r.method == method and r.param == param:
                return r
        raise KeyError((method, param))

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "seed": self.seed,
            "lookup_mode": self.lookup_mode,
            "safety_mode": self.safety_mode,
            "config": self.config,
            "rows": [r.summary() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchReport":
        rows = [MethodStats(**r) for r in doc.get("rows", [])]
        return cls(doc["scene_id"], doc["seed"], doc["lookup_mode"], doc["safety_mode"], rows, doc.get("config", {}))


def merge_reports(reports: Sequence[BenchReport]) -> BenchReport:
    """Concatenate the rows of several reports sharing a scene and seed."""
    if not reports:
        raise DomainError("nothing to merge")
    first = reports[0]
    rows = [r for rep in reports for r in rep.rows]
    return replace(first, rows=rows, config=dict(first.config))


def _csv_value(row: MethodStats, report: BenchReport, col: str):
    if col == "scene_id":
        return report.scene_id
    if col == "seed":
        return report.seed
    v = getattr(row, col)
    return repr(v) if isinstance(v, float) else v


def write_report(report: BenchReport, path, fmt: str | None = None) -> None:
    """Write a report as CSV (config echoed in ``#`` lines) or JSON."""
    path = Path(path)
    fmt = (fmt or ("json" if path.suffix.lower() == ".json" else "csv")).lower()
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=False) + "\n"
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise DomainError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def report_to_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    buf.write("# edfcap bench report\n")
    meta = {
        "scene_id": report.scene_id,
        "seed": report.seed,
        "lookup_mode": report.lookup_mode,
        "safety_mode": report.safety_mode,
        **report.config,
    }
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([_csv_value(row, report, c) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_report(path) -> BenchReport:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return BenchReport.from_dict(json.loads(text))
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# ") and ": " in line:
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif not line.startswith("#"):
            body.append(line)
    rows = []
    for rec in csv.DictReader(body):
        rows.append(
            MethodStats(
                method=rec["method"],
                param=rec["param"],
                samples=int(rec["samples"]),
                **{c: float(rec[c]) for c in CSV_COLUMNS[5:]},
            )
        )
    scene_id = meta.pop("scene_id", "")
    seed = meta.pop("seed", 0)
    lookup_mode = meta.pop("lookup_mode", "")
    safety_mode = meta.pop("safety_mode", "")
    return BenchReport(scene_id, seed, lookup_mode, safety_mode, rows, meta)


# --------------------------------------------------------------------------
# Synthetic forest scenes
# --------------------------------------------------------------------------


def _horizontal_gap(x: float, y: float, half: float) -> float:
    """Distance from the vertical axis through the origin to a square column."""
    gx = max(abs(x) - half, 0.0)
    gy = max(abs(y) - half, 0.0)
    return math.hypot(gx, gy)


def gen_forest_scene(
    seed: int = 7,
    extent: float = 20.0,
    n_trunks: int = 12,
    trunk_radius: tuple[float, float] = (0.15, 0.35),
    trunk_height: tuple[float, float] = (6.0, 14.0),
    clutter: float = 0.25,
    clear_radius: float = 2.0,
    ground_depth: float = 4.0,
    ceiling: float = 12.0,
) -> Scene:
    """Synthetic forest: ground slab, square trunks, canopy and undergrowth spheres.

    The scene spans ``[-extent/2, extent/2]`` horizontally and
    ``[-ground_depth, ceiling]`` vertically; the slab fills everything below
    ``z = 0``. Nothing above the ground enters the vertical cylinder of
    radius ``clear_radius`` around the origin. ``clutter`` is the fraction of
    trunks carrying a canopy sphere; the same fraction of ``n_trunks`` adds
    free-standing undergrowth spheres near the ground.
    """
    if not extent > 0:
        raise DomainError(f"extent must be positive, got {extent}")
    if n_trunks < 0:
        raise DomainError(f"n_trunks must be >= 0, got {n_trunks}")
    if not 0.0 <= clutter <= 1.0:
        raise DomainError(f"clutter must lie in [0, 1], got {clutter}")
    rng = np.random.default_rng(seed)
    half_ext = 0.5 * extent
    bounds = Box((-half_ext, -half_ext, -ground_depth), (half_ext, half_ext, ceiling))
    prims: list = [Box((-half_ext, -half_ext, -ground_depth), (half_ext, half_ext, 0.0))]

    trunks = []
    attempts = 0
    while len(trunks) < n_trunks:
        attempts += 1
        if attempts > 1000 * max(n_trunks, 1):
            raise DomainError("could not place trunks outside the clear region")
        w = float(rng.uniform(*trunk_radius))
        x, y = (float(v) for v in rng.uniform(-half_ext + w, half_ext - w, 2))
        height = float(min(rng.uniform(*trunk_height), ceiling))
        if _horizontal_gap(x, y, w) < clear_radius:
            continue
        trunks.append((x, y, w, height))
        prims.append(Box((x - w, y - w, 0.0), (x + w, y + w, height)))

    n_canopy = int(round(clutter * len(trunks)))
    for x, y, w, height in trunks[:n_canopy]:
        radius = float(rng.uniform(0.8, 2.0))
        # shrink the crown rather than let it reach into the clear cylinder
        radius = min(radius, math.hypot(x, y) - clear_radius)
        if radius <= 0.1:
            continue
        cz = min(height, ceiling)
        prims.append(Sphere((x, y, cz), radius))

    n_bush = int(round(clutter * n_trunks))
    placed = 0
    attempts = 0
    while placed < n_bush:
        attempts += 1
        if attempts > 1000 * n_bush:
            break
        radius = float(rng.uniform(0.3, 1.0))
        x, y = (float(v) for v in rng.uniform(-half_ext + radius, half_ext - radius, 2))
        if math.hypot(x, y) - radius < clear_radius:
            continue
        prims.append(Sphere((x, y, float(rng.uniform(0.0, 0.5))), radius))
        placed += 1
    return Scene(tuple(prims), bounds)


# --------------------------------------------------------------------------
# Monte-Carlo runs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    model: ChainModel
    field: object
    methods: tuple[MethodSpec, ...]
    params: CheckParams
    seed: int
    short_circuit: bool
    links: tuple[int, ...] | None
    length_overrides: dict | None
    radius_overrides: dict | None
    q_overrides: dict | None


def _sample(job: _Job, index: int) -> np.ndarray:
    q = sample_configuration(job.model, job.seed, index)
    if job.q_overrides:
        for j, v in job.q_overrides.items():
            q[j] = v
    return q


def _run_indices(job: _Job, indices: Sequence[int]):
    n_m = len(job.methods)
    n = len(indices)
    collisions = np.zeros((n_m, n), dtype=bool)
    queries = np.zeros((n_m, n), dtype=np.int64)
    times = np.zeros((n_m, n), dtype=np.int64)
    clock = time.perf_counter_ns
    for col, index in enumerate(indices):
        q = _sample(job, index)
        capsules = forward(job.model, q, job.length_overrides, job.radius_overrides)
        if job.links is not None:
            capsules = [capsules[i] for i in job.links]
        for m, method in enumerate(job.methods):
            hit = False
            total_q = 0
            total_t = 0
            for cap in capsules:
                try:
                    t0 = clock()
                    c, nq = method.check(cap, job.field, job.params)
                    total_t += clock() - t0
                except NonTerminationError as exc:
                    raise NonTerminationError(
                        f"{method.label}: {exc} (sample {index}, q={q.tolist()})",
                        exc.queries,
                        configuration=q.tolist(),
                        sample_index=index,
                    ) from exc
                total_q += nq
                if c:
                    hit = True
                    if job.short_circuit:
                        break
            collisions[m, col] = hit
            queries[m, col] = total_q
            times[m, col] = total_t
    return collisions, queries, times


_WORKER_JOB: _Job | None = None


def _init_worker(job: _Job) -> None:
    global _WORKER_JOB
    _WORKER_JOB = job


def _worker_chunk(indices):
    return _run_indices(_WORKER_JOB, indices)


def default_workers() -> int:
    env = os.environ.get("EDFCAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer EDFCAP_THREADS=%r", env)
    return max(1, os.cpu_count() or 1)


def _execute(job: _Job, n_samples: int, workers: int):
    indices = np.arange(n_samples)
    if workers <= 1 or n_samples < 2 * workers:
        return _run_indices(job, indices)
    chunks = [c for c in np.array_split(indices, workers * 4) if len(c)]
    with ProcessPoolExecutor(workers, mp_context=get_context("fork"), initializer=_init_worker, initargs=(job,)) as pool:
        parts = list(pool.map(_worker_chunk, chunks))
    # chunks are contiguous and in order, so concatenation restores sample order
    return tuple(np.concatenate([p[i] for p in parts], axis=1) for i in range(3))


def run_monte_carlo(
    model: ChainModel,
    field,
    methods: Sequence[MethodSpec],
    n_samples: int,
    seed: int,
    params: CheckParams = CheckParams(),
    *,
    short_circuit: bool = False,
    workers: int = 1,
    scene_id: str = "",
    param: str = "",
    links: Sequence[int] | None = None,
    length_overrides: dict[int, float] | None = None,
    radius_overrides: dict[int, float] | None = None,
    q_overrides: dict[int, float] | None = None,
) -> BenchReport:
    """Check ``n_samples`` random configurations with every method.

    A configuration collides under a method if any checked link collides.
    Queries are summed over links; wall time is summed over the check calls.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    methods = tuple(methods)
    job = _Job(
        model,
        field,
        methods,
        params,
        int(seed),
        short_circuit,
        None if links is None else tuple(links),
        length_overrides,
        radius_overrides,
        q_overrides,
    )
    collisions, queries, times = _execute(job, n_samples, workers)
    rows = [
        MethodStats.from_samples(m.label, param, collisions[i], queries[i], times[i])
        for i, m in enumerate(methods)
    ]
    config = {
        "model": model.name,
        "samples": n_samples,
        "methods": [m.label for m in methods],
        "collision_margin": params.collision_margin,
        "max_queries": params.max_queries,
        "short_circuit": short_circuit,
        "links": None if links is None else list(links),
        "field": repr(field),
    }
    return BenchReport(scene_id, int(seed), params.lookup_mode.value, params.safety.label(), rows, config)


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SWEEP_VARIABLES = ("length", "radius", "safety")


@dataclass(frozen=True)
class SweepSpec:
    """One swept variable over the telescopic link, treated as a single link.

    ``length`` forces the link length; ``radius`` replaces the link radius
    with the telescope joint fixed at ``fixed_extension``; ``safety`` sweeps
    the safety distance under each mode in ``safety_modes``, also at
    ``fixed_extension``.
    """

    variable: str
    values: tuple[float, ...]
    methods: tuple[MethodSpec, ...]
    link: int | None = None
    fixed_extension: float = 2.0
    safety_modes: tuple[str, ...] = ("radius", "distance")

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise DomainError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DomainError("sweep needs at least one value")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DomainError(f"sweep values must be strictly increasing: {values}")
        if self.variable in ("length", "radius") and values[0] <= 0:
            raise DomainError(f"{self.variable} values must be positive")
        if self.variable == "safety" and values[0] < 0:
            raise DomainError("safety distances must be >= 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "methods", tuple(self.methods))
        for mode in self.safety_modes:
            SafetyKind(mode)


def run_sweep(
    spec: SweepSpec,
    model: ChainModel,
    field,
    n_samples: int,
    seed: int,
    params: CheckParams = CheckParams(),
    *,
    workers: int = 1,
    scene_id: str = "",
) -> list[BenchReport]:
    """One :class:`BenchReport` per sweep point; rows carry the point in ``param``."""
    link = model.telescopic_link() if spec.link is None else spec.link
    ext_joint = model.collision_links[link].length_extension_joint
    q_fix = None
    if spec.variable in ("radius", "safety") and ext_joint is not None:
        q_fix = {ext_joint: spec.fixed_extension}

    points = []
    for v in spec.values:
        if spec.variable == "length":
            points.append((f"length={v!r}", params, {link: v}, None))
        elif spec.variable == "radius":
            points.append((f"radius={v!r}", params, None, {link: v}))
        else:
            for mode in spec.safety_modes:
                safety = SafetyMode(SafetyKind(mode), v)
                points.append((f"d_s={v!r};mode={mode}", replace(params, safety=safety), None, None))

    reports = []
    for label, p, lengths, radii in points:
        rep = run_monte_carlo(
            model,
            field,
            spec.methods,
            n_samples,
            seed,
            p,
            workers=workers,
            scene_id=scene_id,
            param=label,
            links=(link,),
            length_overrides=lengths,
            radius_overrides=radii,
            q_overrides=q_fix,
        )
        rep.config.update({"sweep": spec.variable, "sweep_values": list(spec.values), "link": link})
        if q_fix:
            rep.config["fixed_extension"] = spec.fixed_extension
        reports.append(rep)
    return reports

