"""Benchmark harness: random endpoint pairs, all planner modes, path metrics.

Metrics are recomputed from the map for every waypoint, never taken from the
values the planner stored while searching.

Hazard of a path is ``roll_cost + pitch_cost + sum(r_sum / r_max)`` over its
waypoints. A failure point is a waypoint whose roll, pitch or roughness
exceeds its safety limit, or that is not on a terrain cell.
"""
from __future__ import annotations

import csv
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attitude import exceeds_limits, pitch_penalty, real_traversability, roll_pitch
from .errors import DegenerateProjection, InvalidGoal, InvalidStart, SamplingExhausted
from .hybrid_map import TERRAIN, HybridMap
from .planner import MODES, SUCCESS, PlanRequest, PlanResult, _Checker, _validate_endpoint, plan
from .robot import DEFAULT_SPEC, RobotSpec

HAZARD_DEFINITION = "hazard = roll_cost + pitch_cost + sum over waypoints of r_sum / r_max"


@dataclass(frozen=True)
class PathMetrics:
    length: float
    roll_cost: float
    pitch_cost: float
    failure_rate: float
    hazard: float
    failure_points: int = 0
    waypoints: int = 0
    min_tau: float = 1.0


@dataclass(frozen=True)
class WaypointEval:
    roll: float
    pitch: float
    r_sum: float
    failure: bool
    tau: float


def evaluate_waypoint(hmap: HybridMap, x, y, theta, spec: RobotSpec = DEFAULT_SPEC,
                      max_roughness=None) -> WaypointEval:
    r_max = max_roughness if max_roughness is not None else (
        hmap.max_roughness if hmap.max_roughness is not None else spec.max_roughness)
    i, j = hmap.cell_index(x, y)
    if not hmap.in_bounds(i, j) or hmap.kind[i, j] != TERRAIN:
        return WaypointEval(0.0, 0.0, 0.0, True, 0.0)
    n = hmap.normal[i, j]
    r_sum = float(hmap.r_sum[i, j])
    try:
        roll, pitch = roll_pitch(theta, float(n[0]), float(n[1]), float(n[2]))
    except DegenerateProjection:
        return WaypointEval(0.0, 0.0, r_sum, True, 0.0)
    tau = real_traversability(r_sum, (roll, pitch), spec, r_max)
    return WaypointEval(roll, pitch, r_sum, exceeds_limits(r_sum, roll, pitch, spec, r_max), tau)


def evaluate(result: PlanResult, hmap: HybridMap, spec: RobotSpec = DEFAULT_SPEC) -> PathMetrics:
    """Per-path safety metrics recomputed from ``hmap``."""
    if not result.success:
        raise ValueError(f"can only evaluate a successful plan, got {result.status}")
    r_max = hmap.max_roughness if hmap.max_roughness is not None else spec.max_roughness
    roll_cost = pitch_cost = rough = 0.0
    failures = 0
    min_tau = 1.0
    for w in result.waypoints:
        ev = evaluate_waypoint(hmap, w.x, w.y, w.theta, spec, r_max)
        roll_cost += abs(ev.roll) / spec.max_roll
        pitch_cost += pitch_penalty(ev.pitch, spec)
        rough += ev.r_sum / r_max
        failures += ev.failure
        min_tau = min(min_tau, ev.tau)
    n = len(result.waypoints)
    return PathMetrics(result.length, roll_cost, pitch_cost, failures / n if n else 0.0,
                       roll_cost + pitch_cost + rough, failures, n, min_tau)


# -- suite -----------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    trial: int
    mode: str
    start: tuple
    goal: tuple
    status: str
    length: float
    expansions: int
    wall_time: float
    metrics: PathMetrics | None

    def row(self) -> dict:
        m = self.metrics
        nan = math.nan
        return {
            "trial": self.trial, "mode": self.mode,
            "start_x": self.start[0], "start_y": self.start[1], "start_theta": self.start[2],
            "goal_x": self.goal[0], "goal_y": self.goal[1], "goal_theta": self.goal[2],
            "status": self.status, "length": self.length, "expansions": self.expansions,
            "roll_cost": m.roll_cost if m else nan, "pitch_cost": m.pitch_cost if m else nan,
            "failure_rate": m.failure_rate if m else nan, "hazard": m.hazard if m else nan,
            "failure_points": m.failure_points if m else -1,
        }


REPORT_COLUMNS = ("trial", "mode", "start_x", "start_y", "start_theta", "goal_x", "goal_y",
                  "goal_theta", "status", "length", "expansions", "roll_cost", "pitch_cost",
                  "failure_rate", "hazard", "failure_points")


@dataclass(frozen=True)
class BenchReport:
    records: tuple = ()
    modes: tuple = MODES
    config: dict = field(default_factory=dict)

    def by_mode(self, mode):
        return [r for r in self.records if r.mode == mode]

    def paired_trials(self):
        """Trial indices where every mode succeeded."""
        ok = {}
        for r in self.records:
            ok.setdefault(r.trial, []).append(r.status == SUCCESS)
        return sorted(t for t, flags in ok.items() if len(flags) == len(self.modes) and all(flags))

    def aggregates(self) -> dict:
        paired = set(self.paired_trials())
        out = {"trials": len({r.trial for r in self.records}), "paired_trials": len(paired),
               "hazard_definition": HAZARD_DEFINITION, "modes": {}}
        for mode in self.modes:
            recs = self.by_mode(mode)
            done = [r for r in recs if r.status == SUCCESS]
            both = [r for r in done if r.trial in paired]
            entry = {"runs": len(recs), "success": len(done),
                     "status_counts": {s: sum(r.status == s for r in recs)
                                       for s in sorted({r.status for r in recs})}}
            for name in ("length", "roll_cost", "pitch_cost", "failure_rate", "hazard"):
                vals = [getattr(r.metrics, name) for r in both]
                entry[f"mean_{name}"] = statistics.fmean(vals) if vals else None
            entry["failure_rate_overall"] = (
                sum(r.metrics.failure_points for r in done)
                / max(1, sum(r.metrics.waypoints for r in done))) if done else None
            entry["hazard_values"] = [r.metrics.hazard for r in both]
            out["modes"][mode] = entry
        return out

    def timing(self) -> dict:
        paired = set(self.paired_trials())
        out = {"modes": {}}
        for mode in self.modes:
            times = [r.wall_time for r in self.by_mode(mode) if r.trial in paired]
            out["modes"][mode] = {"median_wall_time": statistics.median(times) if times else None,
                                  "mean_wall_time": statistics.fmean(times) if times else None,
                                  "wall_times": times}
        t = out["modes"].get("t-hybrid", {}).get("median_wall_time")
        d = out["modes"].get("dem-baseline", {}).get("median_wall_time")
        out["dem_over_t_hybrid_median_ratio"] = d / t if t and d else None
        return out


def _endpoint_ok(chk_by_mode, pose):
    for mode, chk in chk_by_mode.items():
        try:
            _validate_endpoint(chk, pose, mode, InvalidStart, "endpoint")
        except InvalidStart:
            return False
    return True


def sample_endpoints(hmap: HybridMap, spec: RobotSpec, rng, min_separation,
                     modes=MODES, max_attempts=2000, unknown_tau=None):
    """Rejection-sample a valid ``(start, goal)`` pair at least
    ``min_separation`` apart. Raises SamplingExhausted."""
    xmin, xmax, ymin, ymax = hmap.extent
    chk = {m: _Checker(hmap, spec, unknown_tau) for m in modes}
    start = None
    for _ in range(max_attempts):
        pose = (float(rng.uniform(xmin, xmax)), float(rng.uniform(ymin, ymax)),
                float(rng.uniform(-math.pi, math.pi)))
        if not _endpoint_ok(chk, pose):
            continue
        if start is None:
            start = pose
            continue
        if math.hypot(pose[0] - start[0], pose[1] - start[1]) >= min_separation:
            return start, pose
    raise SamplingExhausted(
        f"no valid endpoint pair {min_separation:g} m apart after {max_attempts} samples")


def _run_trial(args):
    hmap, spec, trial, seed, min_separation, modes, max_attempts, options = args
    rng = np.random.default_rng([seed, trial])
    start, goal = sample_endpoints(hmap, spec, rng, min_separation, modes, max_attempts,
                                   options.get("unknown_tau"))
    records = []
    for mode in modes:
        req = PlanRequest(start, goal, hmap, spec, mode, **options)
        try:
            res = plan(req)
        except (InvalidStart, InvalidGoal) as exc:
            res = PlanResult(type(exc).__name__, mode=mode)
        metrics = evaluate(res, hmap, spec) if res.success else None
        records.append(TrialRecord(trial, mode, start, goal, res.status, res.length,
                                   res.expansions, res.wall_time, metrics))
    return records


def run_suite(hmap: HybridMap, spec: RobotSpec = DEFAULT_SPEC, trials: int = 20,
              min_separation: float = 10.0, seed: int = 0, modes=MODES,
              max_attempts: int = 2000, jobs: int = 1, **plan_options) -> BenchReport:
    """Run every mode on ``trials`` random endpoint pairs.

    Trial ``k`` draws from ``default_rng([seed, k])``, so results do not
    depend on ``jobs``. Extra keyword arguments go to :class:`PlanRequest`.
    """
    if trials < 0:
        raise ValueError("trials must be non-negative")
    if min_separation < 0:
        raise ValueError("min_separation must be non-negative")
    xmin, xmax, ymin, ymax = hmap.extent
    if min_separation > math.hypot(xmax - xmin, ymax - ymin):
        raise SamplingExhausted("min_separation exceeds the map diagonal")
    hmap.distance_field  # build before any timing starts
    config = {"trials": trials, "min_separation": min_separation, "seed": seed,
              "modes": list(modes), **{k: v for k, v in plan_options.items()}}
    tasks = [(hmap, spec, k, seed, min_separation, tuple(modes), max_attempts, plan_options)
             for k in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_trial, tasks))
    else:
        chunks = [_run_trial(t) for t in tasks]
    records = tuple(r for chunk in chunks for r in chunk)
    return BenchReport(records, tuple(modes), config)


# -- report files -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report: BenchReport, out_dir, svg=True) -> dict:
    """Write report.csv/report.json (deterministic) plus timing.csv/timing.json
    and optional SVG plots. Returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in (
        ("report_csv", "report.csv"), ("report_json", "report.json"),
        ("timing_csv", "timing.csv"), ("timing_json", "timing.json"))}
    with open(paths["report_csv"], "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {HAZARD_DEFINITION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.records:
            row = r.row()
            w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    with open(paths["report_json"], "w", encoding="utf-8") as fh:
        json.dump({"config": report.config, "aggregates": report.aggregates()}, fh,
                  indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    with open(paths["timing_csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("trial", "mode", "status", "expansions", "wall_time"))
        for r in report.records:
            w.writerow((r.trial, r.mode, r.status, r.expansions, repr(r.wall_time)))
    with open(paths["timing_json"], "w", encoding="utf-8") as fh:
        json.dump(report.timing(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if svg:
        paths["hazard_svg"] = os.path.join(out_dir, "hazard_hist.svg")
        paths["length_svg"] = os.path.join(out_dir, "length_hist.svg")
        paths["timing_svg"] = os.path.join(out_dir, "timing_scatter.svg")
        agg = report.aggregates()
        paired = set(report.paired_trials())
        lengths = {m: [r.length for r in report.by_mode(m) if r.trial in paired] for m in report.modes}
        _histogram_svg({m: agg["modes"][m]["hazard_values"] for m in report.modes},
                       "hazard", paths["hazard_svg"])
        _histogram_svg(lengths, "path length (m)", paths["length_svg"])
        _scatter_svg(report, paths["timing_svg"])
    return paths


_MODE_COLORS = {"t-hybrid": "#1f77b4", "2d-baseline": "#d62728", "dem-baseline": "#2ca02c"}


def _histogram_svg(series: dict, xlabel, path, bins=10, width=480, height=260):
    values = [v for vs in series.values() for v in vs]
    lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts = {m: np.histogram(vs, edges)[0] for m, vs in series.items()}
    top = max([int(c.max()) for c in counts.values() if len(c)] + [1])
    pad, plot_w, plot_h = 40, width - 60, height - 80
    group = plot_w / bins
    bar = group / max(1, len(series))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<line x1="{pad}" y1="{pad + plot_h}" x2="{pad + plot_w}" y2="{pad + plot_h}" stroke="black"/>']
    for k, (mode, c) in enumerate(counts.items()):
        colour = _MODE_COLORS.get(mode, "#555555")
        for b, n in enumerate(c):
            h = plot_h * n / top
            x = pad + b * group + k * bar
            out.append(f'<rect x="{x:.2f}" y="{pad + plot_h - h:.2f}" width="{bar:.2f}" '
                       f'height="{h:.2f}" fill="{colour}"/>')
        out.append(f'<text x="{pad + 120 * k}" y="20" font-size="11" fill="{colour}">{mode}</text>')
    out.append(f'<text x="{pad}" y="{pad + plot_h + 16}" font-size="10">{lo:.3g}</text>')
    out.append(f'<text x="{pad + plot_w - 30}" y="{pad + plot_h + 16}" font-size="10">{hi:.3g}</text>')
    out.append(f'<text x="{pad + plot_w / 2 - 30}" y="{height - 10}" font-size="11">{xlabel}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _scatter_svg(report: BenchReport, path, size=320):
    """Paired wall times: t-hybrid on x, each baseline on y."""
    paired = set(report.paired_trials())
    t = {r.trial: r.wall_time for r in report.by_mode("t-hybrid") if r.trial in paired}
    pts = []
    for mode in report.modes:
        if mode == "t-hybrid":
            continue
        for r in report.by_mode(mode):
            if r.trial in t:
                pts.append((mode, t[r.trial], r.wall_time))
    hi = max([max(a, b) for _, a, b in pts] + [1e-6])
    pad, span = 40, size - 60
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad + span}" x2="{pad + span}" y2="{pad}" stroke="#999"/>']
    for mode, a, b in pts:
        out.append(f'<circle cx="{pad + span * a / hi:.2f}" cy="{pad + span * (1 - b / hi):.2f}" '
                   f'r="3" fill="{_MODE_COLORS.get(mode, "#555")}"/>')
    out.append(f'<text x="{pad}" y="{size - 8}" font-size="11">t-hybrid wall time (s)</text>')
    out.append(f'<text x="4" y="20" font-size="11">baseline wall time (s), max {hi:.3g}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
