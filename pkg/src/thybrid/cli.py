"""Command-line entry point: ``thybrid {assess,plan,bench,gen,render}``.

Settings come from an optional ``--config`` key-value file, then flags; flags
win. Logs go to stderr, data to files (and short summaries to stdout).

Exit codes: 0 ok, 2 bad arguments or unparsable input, 3 I/O error,
4 no path or invalid start/goal, 5 search or sampling limit exceeded,
6 assessment failure (e.g. empty cloud).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys

from . import bench as bench_mod
from . import hybrid_map, kvconfig, pointcloud, terrain_gen
from .errors import (CorruptFile, DegenerateCell, EmptyCloud, FormatError, InvalidGoal,
                     InvalidSpec, InvalidStart, SamplingExhausted, VersionMismatch)
from .planner import (LIMIT_EXCEEDED, MODES, SUCCESS, PlanNode, PlanRequest, PlanResult, plan,
                      write_path_csv, write_summary_json)
from .render import render
from .robot import RobotSpec
from .terrain import TerrainAssessor

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NO_PATH, EXIT_LIMIT, EXIT_ASSESS = 0, 2, 3, 4, 5, 6

log = logging.getLogger("thybrid")

_ROBOT_KEYS = {f.name for f in dataclasses.fields(RobotSpec)}
_OTHER_KEYS = {
    "resolution": float, "mode": str, "max_expansions": int, "timeout": float,
    "unknown_tau": float, "ground_percentile": float, "windowing": "bool",
    "min_points": int, "paper_literal_cost": "bool", "length_term": "bool",
    "trials": int, "min_separation": float, "seed": int, "jobs": int,
}


class UsageError(Exception):
    pass


class _KVFormatter(logging.Formatter):
    def format(self, record):
        return f"level={record.levelname.lower()} logger={record.name} msg={json.dumps(record.getMessage())}"


# -- config -------------------------------------------------------------------------

def load_config(path) -> dict:
    """Parse a key-value config file into typed settings."""
    top, blocks = kvconfig.read(path)
    if blocks:
        raise FormatError(f"{path}: config files take no [blocks]")
    out = {}
    for key, raw in top.items():
        if key in _ROBOT_KEYS:
            out[key] = None if raw.lower() == "none" else kvconfig.floats(raw, 1, key)[0]
        elif key in _OTHER_KEYS:
            kind = _OTHER_KEYS[key]
            try:
                out[key] = kvconfig.to_bool(raw, key) if kind == "bool" else kind(raw)
            except ValueError:
                raise FormatError(f"{key}: bad value {raw!r}") from None
        else:
            raise FormatError(f"{path}: unknown config key {key!r}")
    return out


def _settings(args, base_spec=None):
    """Merge config file and flags; returns ``(RobotSpec, settings dict)``."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for key in _OTHER_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    robot = dict(base_spec.to_dict()) if base_spec is not None else {}
    robot.update({k: v for k, v in cfg.items() if k in _ROBOT_KEYS})
    for item in getattr(args, "set", None) or ():
        key, sep, value = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _ROBOT_KEYS:
            raise UsageError(f"--set expects ROBOT_FIELD=VALUE, got {item!r}")
        robot[key] = None if value.strip().lower() == "none" else float(value)
    spec = RobotSpec(**robot)
    return spec, cfg


def _pose(text):
    try:
        vals = kvconfig.floats(text, 3, "pose")
    except FormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return vals


# -- commands -----------------------------------------------------------------------

def cmd_assess(args) -> int:
    spec, cfg = _settings(args)
    cloud = pointcloud.load(args.cloud, format=args.format, strict=args.strict)
    est = TerrainAssessor(spec, fine_resolution=cfg.get("resolution", 0.5),
                          ground_percentile=cfg.get("ground_percentile", 2.0),
                          windowing=cfg.get("windowing", True),
                          min_points=cfg.get("min_points", 3))
    est.fit(cloud)
    hybrid_map.save(est.map_, args.output, spec)
    counts = est.map_.counts()
    log.info("assessed %d points into a %dx%d map", len(cloud), *est.map_.shape)
    print(" ".join(f"{k}={counts[k]}" for k in ("terrain", "obstacle", "unknown")))
    return EXIT_OK


def _load_map_and_spec(args):
    hmap = hybrid_map.load(args.map)
    spec, cfg = _settings(args, hybrid_map.load_sidecar(args.map))
    return hmap, spec, cfg


def _plan_options(cfg):
    opts = {}
    for key in ("max_expansions", "timeout", "unknown_tau", "paper_literal_cost", "length_term"):
        if key in cfg:
            opts[key] = cfg[key]
    return opts


def cmd_plan(args) -> int:
    hmap, spec, cfg = _load_map_and_spec(args)
    mode = cfg.get("mode", "t-hybrid")
    if mode not in MODES:
        raise UsageError(f"--mode must be one of {', '.join(MODES)}")
    summary_path = args.summary or os.path.splitext(args.output)[0] + ".json"
    try:
        request = PlanRequest(tuple(args.start), tuple(args.goal), hmap, spec, mode,
                              **_plan_options(cfg))
        result = plan(request)
    except (InvalidStart, InvalidGoal) as exc:
        write_summary_json(PlanResult(type(exc).__name__, mode=mode), summary_path,
                           {"error": str(exc)})
        log.error("%s", exc)
        return EXIT_NO_PATH
    extra = {}
    if result.success:
        write_path_csv(result, args.output)
        extra = dataclasses.asdict(bench_mod.evaluate(result, hmap, spec))
    write_summary_json(result, summary_path, extra)
    log.info("status=%s length=%.3f expansions=%d", result.status, result.length, result.expansions)
    print(f"status={result.status} length={result.length:.3f} expansions={result.expansions} "
          f"wall_time={result.wall_time:.3f}")
    if result.status == SUCCESS:
        return EXIT_OK
    return EXIT_LIMIT if result.status == LIMIT_EXCEEDED else EXIT_NO_PATH


def _scenario(ref):
    if os.path.exists(ref):
        return terrain_gen.load_scenario(ref)
    builtin = terrain_gen.builtin_scenarios()
    if ref in builtin:
        return builtin[ref]
    raise FileNotFoundError(f"no scenario file or built-in scenario named {ref!r}")


def cmd_bench(args) -> int:
    if args.input.endswith(".scn") or not os.path.exists(args.input):
        spec, cfg = _settings(args)
        cloud, _ = terrain_gen.generate(_scenario(args.input))
        est = TerrainAssessor(spec, fine_resolution=cfg.get("resolution", 0.5),
                              ground_percentile=cfg.get("ground_percentile", 2.0),
                              windowing=cfg.get("windowing", True),
                              min_points=cfg.get("min_points", 3))
        hmap = est.fit(cloud).map_
    else:
        hmap = hybrid_map.load(args.input)
        spec, cfg = _settings(args, hybrid_map.load_sidecar(args.input))
    modes = tuple(args.modes.split(",")) if args.modes else MODES
    bad = set(modes) - set(MODES)
    if bad:
        raise UsageError(f"unknown modes: {sorted(bad)}")
    report = bench_mod.run_suite(hmap, spec, trials=cfg.get("trials", 20),
                                 min_separation=cfg.get("min_separation", 10.0),
                                 seed=cfg.get("seed", 0), modes=modes, jobs=cfg.get("jobs", 1),
                                 **_plan_options(cfg))
    paths = bench_mod.write_report(report, args.output, svg=not args.no_svg)
    agg = report.aggregates()
    for mode in modes:
        m = agg["modes"][mode]
        print(f"{mode}: success={m['success']}/{m['runs']} mean_length={m['mean_length']} "
              f"mean_hazard={m['mean_hazard']} mean_failure_rate={m['mean_failure_rate']}")
    log.info("wrote %s", ", ".join(sorted(paths.values())))
    return EXIT_OK


def cmd_gen(args) -> int:
    scenario = _scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    cloud, _ = terrain_gen.generate(scenario)
    pointcloud.save(cloud, args.output, format=args.format)
    log.info("wrote %d points to %s", len(cloud), args.output)
    return EXIT_OK


def read_path_csv(path) -> PlanResult:
    """Load a path CSV written by ``plan`` back as a PlanResult (waypoints only)."""
    nodes = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"x", "y", "theta"} - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        parent = None
        length = 0.0
        for row in reader:
            parent = PlanNode(float(row["x"]), float(row["y"]), float(row["theta"]), 0.0, parent,
                              None, float(row.get("tau_real", "nan")),
                              float(row.get("roll", "nan")), float(row.get("pitch", "nan")))
            nodes.append(parent)
            length = float(row.get("cumulative_length", "nan"))
    return PlanResult(SUCCESS, tuple(nodes), length, 0, 0.0, os.path.basename(path))


def cmd_render(args) -> int:
    hmap = hybrid_map.load(args.map)
    overlays = [read_path_csv(p) for p in args.path or ()]
    labels = [os.path.splitext(os.path.basename(p))[0] for p in args.path or ()]
    render(hmap, args.output, overlays, labels, scale=args.scale)
    log.info("wrote %s", args.output)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _bool_flag(parser, name, dest, help_on, help_off):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(f"--{name}", dest=dest, action="store_const", const=True, help=help_on)
    group.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False, help=help_off)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key-value settings file; flags override it")
    common.add_argument("--set", action="append", metavar="FIELD=VALUE",
                        help="override one robot parameter, e.g. max_roll=0.2 (repeatable)")
    common.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"), help="stderr log level")

    assess_opts = argparse.ArgumentParser(add_help=False)
    assess_opts.add_argument("--resolution", type=float, help="fine map resolution in metres (default 0.5)")
    assess_opts.add_argument("--ground-percentile", type=float,
                             help="percentile of z taken as local ground per column (default 2)")
    assess_opts.add_argument("--min-points", type=int, help="points needed to fit a column plane (default 3)")
    _bool_flag(assess_opts, "windowing", "windowing",
               "keep only the ground-following vertical window (default)",
               "keep every point, including overhangs")

    plan_opts = argparse.ArgumentParser(add_help=False)
    plan_opts.add_argument("--mode", choices=MODES, help="planner (default t-hybrid)")
    plan_opts.add_argument("--max-expansions", type=int, help="search expansion cap (default 200000)")
    plan_opts.add_argument("--timeout", type=float, help="search time cap in seconds")
    plan_opts.add_argument("--unknown-tau", type=float,
                           help="treat unknown cells as passable with this traversability")
    _bool_flag(plan_opts, "paper-literal-cost", "paper_literal_cost",
               "charge k*tau instead of k*(1 - tau)", "charge k*(1 - tau) (default)")
    _bool_flag(plan_opts, "length-term", "length_term",
               "add arc length to the cost (default)", "drop the arc-length cost term")

    parser = argparse.ArgumentParser(prog="thybrid", description=__doc__.split("\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog=__doc__.split("\n\n", 1)[1])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("assess", parents=[common, assess_opts], help="point cloud -> hybrid map")
    p.add_argument("cloud", help="input cloud (.xyz/.csv/.txt, .pcd, .ply; ASCII)")
    p.add_argument("-o", "--output", required=True, help="output map file; a .json sidecar is written next to it")
    p.add_argument("--format", default="auto", choices=("auto",) + pointcloud.FORMATS)
    p.add_argument("--strict", action="store_true", help="reject rows with non-finite values instead of dropping them")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("plan", parents=[common, plan_opts], help="plan a path on a hybrid map")
    p.add_argument("map", help="map file written by assess")
    p.add_argument("--start", type=_pose, required=True, metavar="X,Y,THETA")
    p.add_argument("--goal", type=_pose, required=True, metavar="X,Y,THETA")
    p.add_argument("-o", "--output", required=True, help="path CSV")
    p.add_argument("--summary", help="summary JSON (default: output with .json)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", parents=[common, plan_opts, assess_opts],
                       help="compare planner modes on random endpoints")
    p.add_argument("input", help="map file, scenario file (.scn) or built-in scenario name")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--trials", type=int, help="number of endpoint pairs (default 20)")
    p.add_argument("--min-separation", type=float, help="minimum start-goal distance in metres (default 10)")
    p.add_argument("--seed", type=int, help="base seed for endpoint sampling (default 0)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--modes", help=f"comma-separated subset of {','.join(MODES)}")
    p.add_argument("--no-svg", action="store_true", help="skip SVG plots")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic cloud from a scenario")
    p.add_argument("scenario", help="scenario file or built-in scenario name")
    p.add_argument("-o", "--output", required=True, help="output cloud file")
    p.add_argument("--format", default="auto", choices=("auto",) + pointcloud.FORMATS)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("render", parents=[common], help="draw a map (.ppm or .svg)")
    p.add_argument("map", help="map file")
    p.add_argument("-o", "--output", required=True, help="image path ending in .ppm or .svg")
    p.add_argument("--path", action="append", metavar="CSV", help="path CSV to overlay (repeatable)")
    p.add_argument("--scale", type=int, default=4, help="pixels per cell (default 4)")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_KVFormatter())
    log.handlers[:] = [handler]
    log.setLevel(args.log_level.upper())
    log.propagate = False
    try:
        return args.func(args)
    except SamplingExhausted as exc:
        log.error("%s", exc)
        print(f"thybrid: error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (UsageError, InvalidSpec, FormatError) as exc:
        log.error("%s", exc)
        print(f"thybrid: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, CorruptFile, VersionMismatch) as exc:
        log.error("%s", exc)
        print(f"thybrid: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EmptyCloud, DegenerateCell) as exc:
        log.error("%s", exc)
        print(f"thybrid: assessment failed: {exc}", file=sys.stderr)
        return EXIT_ASSESS
    except ValueError as exc:
        log.error("%s", exc)
        print(f"thybrid: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
