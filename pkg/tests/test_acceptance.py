"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary."""

import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats
from scipy.spatial import cKDTree

from edfcap.bench import SweepSpec, default_workers, parse_methods, run_monte_carlo, run_sweep
from edfcap.cli import main as cli_main
from edfcap.collision import (
    CheckParams,
    SafetyMode,
    check_bi,
    check_fixed,
    check_uni,
    effective_pair,
    oracle_check,
    step_length,
)
from edfcap.field import (
    AnalyticField,
    GridSpec,
    OccupancyGrid,
    Scene,
    VoxelField,
    edt,
    save_scene,
    voxelize,
)
from edfcap.geometry import Box, Capsule, Sphere
from edfcap.kinematics import load_model

EPS = 1e-3
N_MC = 10_000
MODEL = load_model()
WORLD = Box((-10, -10, -10), (10, 10, 10))


def random_pair(rng):
    prims = []
    for _ in range(rng.integers(1, 7)):
        if rng.random() < 0.5:
            prims.append(Sphere(tuple(rng.uniform(-4, 4, 3)), rng.uniform(0.1, 1.2)))
        else:
            lo = rng.uniform(-4, 3, 3)
            prims.append(Box(tuple(lo), tuple(lo + rng.uniform(0.1, 2.0, 3))))
    a = rng.uniform(-4, 4, 3)
    u = rng.normal(size=3)
    b = a + rng.uniform(0.5, 6) * u / np.linalg.norm(u)
    return Capsule.between(tuple(a), tuple(b), rng.uniform(0.05, 0.6)), AnalyticField(Scene(tuple(prims), WORLD))


# -- 1 ------------------------------------------------------------------------


def test_c01_oracle_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    trials = agree = collisions = 0
    while trials < 1000:
        cap, field = random_pair(rng)
        ref = oracle_check(cap, field, EPS)
        if abs(ref.min_clearance) <= 10 * EPS:
            continue
        trials += 1
        collisions += ref.collision
        uni, bi = check_uni(cap, field), check_bi(cap, field)
        agree += uni.verdict is ref.verdict and bi.verdict is ref.verdict
    elapsed = time.perf_counter() - t0
    ok = agree == trials and elapsed < 60
    detail = f"{agree}/{trials} agree ({collisions} collisions), {elapsed:.1f}s"
    assert acceptance("criterion 1 oracle equivalence", ok, detail), detail


# -- 2 ------------------------------------------------------------------------


def _skip_violations(cap, field, report, params):
    """Worst clearance found by dense sampling inside each skipped interval."""
    axis = cap.axis
    start, direction = np.asarray(axis.start), np.asarray(axis.direction)
    r_eff = cap.radius + params.safety.d_s
    worst = math.inf
    for alpha in report.queried_alphas:
        p = axis.end if alpha == axis.length else tuple(start + alpha * direction)
        d = field.distance(p)
        span = step_length(d, r_eff)
        lo, hi = max(0.0, alpha - span), min(axis.length, alpha + span)
        a = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / EPS)) + 1))[1:-1]
        if not len(a):
            continue
        dd = field.distances(start + a[:, None] * direction)
        worst = min(worst, float((dd - r_eff).min()))
    return worst


def test_c02_skip_intervals(acceptance):
    rng = np.random.default_rng(7)
    runs = 0
    worst = math.inf
    while runs < 100:
        cap, field = random_pair(rng)
        params = CheckParams(trace=True, safety=SafetyMode.add_to_radius(float(rng.choice([0.0, 0.05]))))
        for check in (check_uni, check_bi):
            rep = check(cap, field, params)
            if rep.collision:
                break
            worst = min(worst, _skip_violations(cap, field, rep, params))
        else:
            runs += 1
    ok = worst >= -1e-9
    detail = f"100 free runs (uni and bi), min skipped clearance {worst:.3e}"
    assert acceptance("criterion 2 skip intervals", ok, detail), detail


# -- 3 ------------------------------------------------------------------------


def test_c03_safety_dominance(acceptance):
    rng = np.random.default_rng(8)
    count = wins = 0
    while count < 10_000:
        r = rng.uniform(0.0, 1.0)
        d_s = rng.uniform(0.0, 0.5)
        d = rng.uniform(0.0, 10.0)
        if not (d - d_s > r and d_s > 0):
            continue
        count += 1
        add = step_length(*effective_pair(d, r, SafetyMode.add_to_radius(d_s)))
        sub = step_length(*effective_pair(d, r, SafetyMode.subtract_from_distance(d_s)))
        wins += add > sub
    detail = f"{wins}/{count} strictly larger"
    assert acceptance("criterion 3 safety dominance", wins == count, detail), detail


# -- 4 ------------------------------------------------------------------------


def _brute_edt(occ):
    idx = np.argwhere(np.ones(occ.spec.dims, dtype=bool))
    occupied = np.argwhere(occ.cells).astype(float)
    out = np.empty(len(idx))
    for s in range(0, len(idx), 1024):
        diff = idx[s : s + 1024, None, :] - occupied[None]
        out[s : s + 1024] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
    return out.reshape(occ.spec.dims) * occ.spec.resolution


def test_c04_edt_exactness(acceptance):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst_err = worst_lip = 0.0
    for g in range(50):
        dims = (32, 32, 32) if g < 5 else tuple(int(v) for v in rng.integers(1, 33, 3))
        res = float(rng.uniform(0.05, 1.0))
        cells = rng.random(dims) < rng.uniform(0.005, 0.1)
        cells.flat[rng.integers(cells.size)] = True
        occ = OccupancyGrid(GridSpec(tuple(rng.uniform(-5, 5, 3)), res, dims), cells)
        v = edt(occ, max_distance=1e6).values
        worst_err = max(worst_err, float(np.abs(v - _brute_edt(occ)).max()))
        for ax in range(3):
            if dims[ax] > 1:
                worst_lip = max(worst_lip, float((np.abs(np.diff(v, axis=ax)) - res).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_err <= 1e-9 and worst_lip <= 1e-9 and elapsed < 120
    detail = f"max |edt - brute| {worst_err:.1e}, max adjacency excess {worst_lip:.1e}, {elapsed:.1f}s"
    assert acceptance("criterion 4 EDT exactness", ok, detail), detail


# -- 5, 6 ---------------------------------------------------------------------

SEPARATIONS = (0.1, 0.2, 0.3, 0.4, 0.5)


@pytest.fixture(scope="module")
def forest_run(forest_analytic):
    methods = parse_methods("bi,uni," + ",".join(f"fixed:{s}" for s in SEPARATIONS))
    return run_monte_carlo(
        MODEL, forest_analytic, methods, N_MC, 42, workers=default_workers(), scene_id="forest7"
    )


def test_c05_collision_fractions(forest_run, acceptance):
    uni, bi = forest_run.row("uni"), forest_run.row("bi")
    paired = bool(np.array_equal(uni.collisions, bi.collisions))
    fixed = {s: forest_run.row(f"fixed:{s}") for s in SEPARATIONS}
    above = all(fixed[s].collision_fraction >= uni.collision_fraction for s in SEPARATIONS)
    # exact one-sided McNemar test on discordant pairs
    c05, c01 = fixed[0.5].collisions, fixed[0.1].collisions
    up, down = int(np.sum(c05 & ~c01)), int(np.sum(c01 & ~c05))
    p = stats.binomtest(up, up + down, 0.5, alternative="greater").pvalue if up + down else 1.0
    ok = paired and above and p < 0.05
    fr = ", ".join(f"{s}:{fixed[s].collision_fraction:.4f}" for s in SEPARATIONS)
    detail = (
        f"uni=bi per config: {paired}; uni {uni.collision_fraction:.4f}; fixed {fr}; "
        f"0.5 vs 0.1 discordant {up}/{down}, p={p:.1e}"
    )
    assert acceptance("criterion 5 collision fractions", ok, detail), detail


def test_c06_query_counts_and_time(forest_run, acceptance):
    q = {r.method: r.mean_queries for r in forest_run.rows}
    t = {r.method: r.mean_ns for r in forest_run.rows}
    order = q["bi"] <= q["uni"] < q["fixed:0.3"] < q["fixed:0.1"]
    speedup = t["fixed:0.1"] / t["bi"]
    ok = order and speedup >= 2.0
    detail = (
        f"queries bi {q['bi']:.2f} uni {q['uni']:.2f} fixed0.3 {q['fixed:0.3']:.2f} "
        f"fixed0.1 {q['fixed:0.1']:.2f}; time bi {t['bi'] / 1e3:.1f}us fixed0.1 "
        f"{t['fixed:0.1'] / 1e3:.1f}us ({speedup:.1f}x)"
    )
    assert acceptance("criterion 6 queries and wall time", ok, detail), detail


# -- 7 ------------------------------------------------------------------------


def test_c07_empty_field_closed_forms(acceptance):
    fields = {
        "analytic": AnalyticField(Scene((), WORLD)),
        "voxel": VoxelField(edt(voxelize(Scene((), WORLD), 0.5))),
    }
    mismatches = []
    cases = 0
    for name, field in fields.items():
        for length in ("1", "3.5", "5.65"):
            cap = Capsule.between((-2, 0.3, 0.1), (-2 + float(length), 0.3, 0.1), 0.3)
            got = {"uni": check_uni(cap, field).queries, "bi": check_bi(cap, field).queries}
            want = {"uni": 2, "bi": 2}
            for s in ("0.1", "0.3", "0.5"):
                got[s] = check_fixed(cap, field, float(s)).queries
                want[s] = math.ceil(Fraction(length) / Fraction(s)) + 1
            cases += len(want)
            mismatches += [(name, length, k, got[k], want[k]) for k in want if got[k] != want[k]]
    detail = f"{cases - len(mismatches)}/{cases} exact" + (f"; first mismatch {mismatches[0]}" if mismatches else "")
    assert acceptance("criterion 7 empty-field closed forms", not mismatches, detail), detail


# -- 8 ------------------------------------------------------------------------


def _sweep(field, variable, values, methods):
    spec = SweepSpec(variable, values, tuple(parse_methods(methods)))
    return run_sweep(spec, MODEL, field, N_MC, 42, workers=default_workers(), scene_id="forest7")


def test_c08_sweep_trends(forest_analytic, acceptance):
    lengths = (2.0, 3.0, 4.0, 5.0, 6.0)
    reps = _sweep(forest_analytic, "length", lengths, "bi,uni,fixed:0.3")
    rows = {(r.method, r.param): r for rep in reps for r in rep.rows}

    def free_mean(method, v):
        r = rows[(method, f"length={v!r}")]
        return float(r.queries[~r.collisions].mean())

    fixed_exact = all(
        free_mean("fixed:0.3", v) == math.ceil(Fraction(str(v)) / Fraction("0.3")) + 1 for v in lengths
    )
    fixed_overall = [rows[("fixed:0.3", f"length={v!r}")].mean_queries for v in lengths]
    fixed_grows = all(b > a for a, b in zip(fixed_overall, fixed_overall[1:]))
    sub = {}
    for m in ("uni", "bi"):
        qs = [free_mean(m, v) for v in lengths]
        per_len = [q / v for q, v in zip(qs, lengths)]
        sub[m] = qs[-1] / qs[0] < lengths[-1] / lengths[0] and all(b < a for a, b in zip(per_len, per_len[1:]))
    length_ok = fixed_exact and fixed_grows and all(sub.values())

    radii = (0.1, 0.2, 0.3, 0.4, 0.5)
    reps = _sweep(forest_analytic, "radius", radii, "bi,uni,fixed:0.1,fixed:0.3")
    radius_means = {}
    for rep in reps:
        for r in rep.rows:
            radius_means.setdefault(r.method, []).append(r.mean_queries)
    radius_ok = all(all(b <= a for a, b in zip(v, v[1:])) for v in radius_means.values())

    reps = _sweep(forest_analytic, "safety", (0.05, 0.1, 0.2), "bi,uni,fixed:0.3")
    safety_rows = {(r.method, r.param): r for rep in reps for r in rep.rows}
    safety_ok = True
    gaps = []
    for d_s in (0.05, 0.1, 0.2):
        for m in ("bi", "uni", "fixed:0.3"):
            add = safety_rows[(m, f"d_s={d_s!r};mode=radius")]
            sub_ = safety_rows[(m, f"d_s={d_s!r};mode=distance")]
            safety_ok &= add.mean_queries <= sub_.mean_queries
            safety_ok &= bool(np.array_equal(add.collisions, sub_.collisions))
            if m == "bi":
                gaps.append(sub_.mean_queries - add.mean_queries)

    ok = length_ok and radius_ok and safety_ok
    fmt = lambda xs: "/".join(f"{x:.2f}" for x in xs)  # noqa: E731
    detail = (
        f"length: fixed exact {fixed_exact}, grows {fixed_grows}, sublinear {sub}; "
        f"radius means bi {fmt(radius_means['bi'])} uni {fmt(radius_means['uni'])} "
        f"fixed0.1 {fmt(radius_means['fixed:0.1'])}; "
        f"safety bi sub-add gaps {fmt(gaps)}"
    )
    assert acceptance("criterion 8 sweep trends", ok, detail), detail


# -- 9 ------------------------------------------------------------------------


def test_c09_voxel_conservatism(forest_scene, acceptance):
    occ = voxelize(forest_scene, 0.1)
    field = VoxelField(edt(occ))
    tree = cKDTree(occ.occupied_centers())
    rng = np.random.default_rng(9)
    lo, hi = np.asarray(forest_scene.bounds.min), np.asarray(forest_scene.bounds.max)
    free = checked = bad = 0
    worst = math.inf
    while checked < 1000:
        a = rng.uniform(lo, hi)
        u = rng.normal(size=3)
        b = a + rng.uniform(0.5, 6.0) * u / np.linalg.norm(u)
        if np.any(b < lo) or np.any(b > hi):
            continue
        checked += 1
        cap = Capsule.between(tuple(a), tuple(b), rng.uniform(0.1, 0.5))
        verdicts = [check_uni(cap, field).collision, check_bi(cap, field).collision]
        if all(verdicts):
            continue
        free += 1
        n = max(2, int(math.ceil(cap.length / EPS)) + 1)
        pts = a + np.linspace(0, 1, n)[:, None] * (b - a)
        clearance = float(tree.query(pts)[0].min() - cap.radius)
        worst = min(worst, clearance)
        bad += clearance <= 0
    detail = f"{free} free verdicts of {checked} capsules, {bad} unconfirmed, min clearance {worst:.4f}"
    assert acceptance("criterion 9 voxel conservatism", bad == 0 and free > 0, detail), detail


# -- 10 -----------------------------------------------------------------------


def _mask_timing(text):
    lines = text.splitlines()
    header_at = next(i for i, line in enumerate(lines) if line.startswith("scene_id,"))
    cols = lines[header_at].split(",")
    timing = [cols.index("mean_ns"), cols.index("median_ns")]
    out = lines[: header_at + 1]
    for line in lines[header_at + 1 :]:
        parts = line.split(",")
        for i in timing:
            parts[i] = ""
        out.append(",".join(parts))
    return "\n".join(out).encode()


def test_c10_determinism(tmp_path, forest_scene, acceptance):
    save_scene(forest_scene, tmp_path / "forest.json")
    argv = [
        "bench", "--scene", str(tmp_path / "forest.json"), "--res", "0.2", "--model", "crane7.json",
        "--samples", "400", "--methods", "bi,uni,fixed:0.1,fixed:0.3,fixed:0.5", "--seed", "42",
        "--threads", "2", "--out", "report.csv",
    ]
    cwd = os.getcwd()
    outputs = []
    try:
        for run in ("a", "b"):
            (tmp_path / run).mkdir()
            os.chdir(tmp_path / run)
            assert cli_main(argv) == 0
            outputs.append((tmp_path / run / "report.csv").read_text())
    finally:
        os.chdir(cwd)
    same = _mask_timing(outputs[0]) == _mask_timing(outputs[1])
    rows = len([line for line in outputs[0].splitlines() if not line.startswith("#")]) - 1
    detail = f"masked CSVs identical: {same} ({len(outputs[0])} bytes, 5 method rows)"
    assert acceptance("criterion 10 determinism", same and rows == 5, detail), detail
