"""Command-line front end.

Exit codes: 0 success (``check``: free), 10 ``check`` found a collision,
1 usage error, 2 I/O error, 3 malformed input file, 4 numeric error or
non-terminating check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import (
    MethodSpec,
    SweepSpec,
    default_workers,
    gen_forest_scene,
    merge_reports,
    parse_methods,
    run_monte_carlo,
    run_sweep,
    write_report,
)
from .collision import CheckParams, SafetyKind, SafetyMode, check_bi, check_fixed, check_uni, oracle_check
from .errors import (
    DomainError,
    EdfcapError,
    GridFormatError,
    InputError,
    NonTerminationError,
    ParseError,
    ResourceError,
)
from .field import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_VOXEL_BUDGET,
    AnalyticField,
    DistanceGrid,
    LookupMode,
    OccupancyGrid,
    OutOfBounds,
    VoxelField,
    edt,
    ingest_xyz,
    load_grid,
    load_scene,
    save_grid,
    save_scene,
    voxelize,
)
from .field.io import MAGIC
from .geometry import Box, Capsule
from .kinematics import load_model

log = logging.getLogger("edfcap")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4
EXIT_COLLISION = 10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, n: int, what: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != n:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"{what}: not a number in {text!r}") from None


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"{what}: not a number in {text!r}") from None


def _add_field_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("distance field")
    g.add_argument("--field", help="distance grid file (.vgd)")
    g.add_argument("--scene", help="scene JSON; voxelized with --res unless --analytic")
    g.add_argument("--res", type=float, help="voxel size in meters when building from --scene")
    g.add_argument("--analytic", action="store_true", help="use the exact analytic field of --scene")
    g.add_argument("--max-distance", type=float, default=DEFAULT_MAX_DISTANCE)
    g.add_argument("--lookup", choices=["conservative", "raw"], default="conservative")
    g.add_argument("--oob", choices=["free", "occupied"], default="free", help="out-of-bounds policy")


def _add_check_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("check parameters")
    g.add_argument("--safety", type=float, default=0.0, help="safety distance d_s in meters")
    g.add_argument("--safety-mode", choices=["radius", "distance"], default="radius")
    g.add_argument("--margin", type=float, default=0.0, help="collision margin in meters")
    g.add_argument("--max-queries", type=int, default=1_000_000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edfcap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"edfcap {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("voxelize", help="scene JSON -> occupancy grid")
    p.add_argument("--scene", required=True)
    p.add_argument("--res", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_VOXEL_BUDGET, help="maximum voxel count")

    p = sub.add_parser("edf", help="occupancy grid -> distance grid")
    p.add_argument("--occ", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-distance", type=float, default=DEFAULT_MAX_DISTANCE)

    p = sub.add_parser("cloud2occ", help="ASCII XYZ point cloud -> occupancy grid")
    p.add_argument("--cloud", required=True)
    p.add_argument("--res", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bounds", help="xmin,ymin,zmin,xmax,ymax,zmax (default: cloud AABB + 1 voxel)")

    p = sub.add_parser("check", help="check one capsule")
    _add_field_args(p)
    _add_check_args(p)
    p.add_argument("--capsule", required=True, help="x1,y1,z1,x2,y2,z2,r")
    p.add_argument("--method", default="bi", help="bi | uni | fixed[:sep] | oracle[:step]")
    p.add_argument("--sep", type=float, help="sphere separation for --method fixed")
    p.add_argument("--step", type=float, help="sampling step for --method oracle")
    p.add_argument("--trace", action="store_true", help="print queried arc lengths to stderr")

    for name, helptext in (("bench", "Monte-Carlo benchmark"), ("sweep", "parameter sweep")):
        p = sub.add_parser(name, help=helptext)
        _add_field_args(p)
        _add_check_args(p)
        p.add_argument("--model", help="chain fixture JSON (default: bundled crane7)")
        p.add_argument("--samples", type=int, default=10_000)
        p.add_argument("--methods", default="bi,uni,fixed:0.1,fixed:0.3,fixed:0.5")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", required=True, help="report path (.csv or .json)")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--threads", type=int, help="worker processes (default: EDFCAP_THREADS or CPU count)")
        p.add_argument("--scene-id", help="label written to the report (default: file stem)")
        if name == "bench":
            p.add_argument("--short-circuit", action="store_true", help="stop at the first colliding link")
        else:
            p.add_argument("--var", required=True, choices=["length", "radius", "safety"])
            p.add_argument("--values", required=True, help="comma-separated, strictly increasing")
            p.add_argument("--link", type=int, help="collision link index (default: telescopic link)")
            p.add_argument("--fixed-extension", type=float, default=2.0)
            p.add_argument("--safety-modes", default="radius,distance")

    p = sub.add_parser("forest", help="write a synthetic forest scene JSON")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--extent", type=float, default=20.0)
    p.add_argument("--trunks", type=int, default=12)
    p.add_argument("--clutter", type=float, default=0.25)
    p.add_argument("--out", required=True)

    p = sub.add_parser("info", help="describe a grid, scene or chain file")
    p.add_argument("path")
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _valid_flags(parser: argparse.ArgumentParser, argv) -> str:
    subs = _subparsers(parser)
    target = parser
    for tok in argv:
        if tok in subs:
            target = subs[tok]
            break
    flags = sorted({s for a in target._actions for s in a.option_strings})
    return ", ".join(flags)


# --------------------------------------------------------------------------
# Field and parameter resolution
# --------------------------------------------------------------------------


def _load_field(args):
    mode = LookupMode(args.lookup)
    oob = OutOfBounds(args.oob)
    if args.field and args.scene:
        raise UsageError("give either --field or --scene, not both")
    if args.field:
        grid = load_grid(args.field)
        if not isinstance(grid, DistanceGrid):
            raise InputError(f"{args.field} holds an occupancy grid; run `edfcap edf` first")
        return VoxelField(grid, mode, oob), Path(args.field).stem
    if args.scene:
        scene = load_scene(args.scene)
        if args.analytic:
            return AnalyticField(scene), Path(args.scene).stem
        if args.res is None:
            raise UsageError("--scene needs --res (or --analytic)")
        grid = edt(voxelize(scene, args.res), args.max_distance)
        return VoxelField(grid, mode, oob), Path(args.scene).stem
    raise UsageError("a distance field is required: --field or --scene")


def _params(args) -> CheckParams:
    safety = SafetyMode(SafetyKind(args.safety_mode), args.safety)
    return CheckParams(
        lookup_mode=LookupMode(args.lookup),
        safety=safety,
        collision_margin=args.margin,
        max_queries=args.max_queries,
    )


def _resolved(args) -> dict:
    skip = {"verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_voxelize(args) -> int:
    occ = voxelize(load_scene(args.scene), args.res, args.budget)
    save_grid(occ, args.out)
    print(f"occupancy grid {occ.spec.dims}, {occ.occupied_count} occupied -> {args.out}")
    return EXIT_OK


def cmd_edf(args) -> int:
    occ = load_grid(args.occ)
    if not isinstance(occ, OccupancyGrid):
        raise InputError(f"{args.occ} is not an occupancy grid")
    grid = edt(occ, args.max_distance)
    save_grid(grid, args.out)
    print(f"distance grid {grid.spec.dims}, max_distance {grid.max_distance} -> {args.out}")
    return EXIT_OK


def cmd_cloud2occ(args) -> int:
    bounds = None
    if args.bounds:
        v = _floats(args.bounds, 6, "--bounds")
        bounds = Box(v[:3], v[3:])
    occ = ingest_xyz(args.cloud, args.res, bounds)
    save_grid(occ, args.out)
    print(f"occupancy grid {occ.spec.dims}, {occ.occupied_count} occupied -> {args.out}")
    return EXIT_OK


def _method_from_args(args) -> MethodSpec:
    text = args.method
    if ":" not in text:
        if text == "fixed":
            if args.sep is None:
                raise UsageError("--method fixed needs --sep (or fixed:<sep>)")
            return MethodSpec("fixed", args.sep)
        if text == "oracle":
            return MethodSpec("oracle", args.step if args.step is not None else 1e-3)
    return MethodSpec.parse(text)


def cmd_check(args) -> int:
    v = _floats(args.capsule, 7, "--capsule")
    capsule = Capsule.between(v[0:3], v[3:6], v[6])
    method = _method_from_args(args)
    field, _ = _load_field(args)
    params = _params(args)
    if args.trace:
        params = CheckParams(**{**params.__dict__, "trace": True})
    if method.kind == "oracle":
        res = oracle_check(capsule, field, method.value, params)
        collision, detail = res.collision, f"samples={res.samples} min_clearance={res.min_clearance!r}"
    else:
        if method.kind == "uni":
            rep = check_uni(capsule, field, params)
        elif method.kind == "bi":
            rep = check_bi(capsule, field, params)
        else:
            rep = check_fixed(capsule, field, method.value, params)
        collision, detail = rep.collision, f"queries={rep.queries}"
        if args.trace:
            print("alphas: " + " ".join(repr(a) for a in rep.queried_alphas), file=sys.stderr)
    log.info("%s %s", method.label, detail)
    print("collision" if collision else "free")
    return EXIT_COLLISION if collision else EXIT_OK


def _workers(args) -> int:
    return args.threads if args.threads is not None else default_workers()


def cmd_bench(args) -> int:
    field, stem = _load_field(args)
    model = load_model(args.model)
    methods = parse_methods(args.methods)
    report = run_monte_carlo(
        model,
        field,
        methods,
        args.samples,
        args.seed,
        _params(args),
        short_circuit=args.short_circuit,
        workers=_workers(args),
        scene_id=args.scene_id or stem,
    )
    report.config["cli"] = _resolved(args)
    write_report(report, args.out, args.format)
    for row in report.rows:
        print(f"{row.method:>12}  collisions {row.collision_fraction:.4f}  queries {row.mean_queries:.3f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    field, stem = _load_field(args)
    model = load_model(args.model)
    spec = SweepSpec(
        args.var,
        tuple(_float_list(args.values, "--values")),
        tuple(parse_methods(args.methods)),
        link=args.link,
        fixed_extension=args.fixed_extension,
        safety_modes=tuple(m.strip() for m in args.safety_modes.split(",") if m.strip()),
    )
    reports = run_sweep(
        spec, model, field, args.samples, args.seed, _params(args),
        workers=_workers(args), scene_id=args.scene_id or stem,
    )
    report = merge_reports(reports)
    report.config["cli"] = _resolved(args)
    write_report(report, args.out, args.format)
    for row in report.rows:
        print(f"{row.param:>24} {row.method:>12}  queries {row.mean_queries:.3f}")
    return EXIT_OK


def cmd_forest(args) -> int:
    scene = gen_forest_scene(args.seed, extent=args.extent, n_trunks=args.trunks, clutter=args.clutter)
    save_scene(scene, args.out)
    print(f"{len(scene.primitives)} primitives -> {args.out}")
    return EXIT_OK


def cmd_info(args) -> int:
    path = Path(args.path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        grid = load_grid(path)
        spec = grid.spec
        info = {
            "kind": "occupancy" if isinstance(grid, OccupancyGrid) else "distance",
            "dims": list(spec.dims),
            "resolution": spec.resolution,
            "origin": list(spec.origin),
            "upper": list(spec.upper),
        }
        if isinstance(grid, OccupancyGrid):
            info["occupied"] = grid.occupied_count
        else:
            info["max_distance"] = grid.max_distance
            info["min_value"] = float(grid.values.min())
            info["max_value"] = float(grid.values.max())
    else:
        try:
            doc = json.loads(path.read_text())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: neither a grid file nor JSON ({exc})") from None
        if "joints" in doc:
            model = load_model(path)
            info = {
                "kind": "chain",
                "name": model.name,
                "joints": [j.name for j in model.joints],
                "collision_links": [link.name for link in model.collision_links],
            }
        else:
            scene = load_scene(path)
            info = {
                "kind": "scene",
                "primitives": len(scene.primitives),
                "bounds": [list(scene.bounds.min), list(scene.bounds.max)],
            }
    print(json.dumps(info, indent=2))
    return EXIT_OK


COMMANDS = {
    "voxelize": cmd_voxelize,
    "edf": cmd_edf,
    "cloud2occ": cmd_cloud2occ,
    "check": cmd_check,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "forest": cmd_forest,
    "info": cmd_info,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"edfcap: usage error: {exc}", file=sys.stderr)
        print(f"valid flags: {_valid_flags(parser, argv)}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"edfcap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GridFormatError, ParseError, InputError) as exc:
        print(f"edfcap: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NonTerminationError, DomainError, ResourceError) as exc:
        print(f"edfcap: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EdfcapError as exc:
        print(f"edfcap: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
