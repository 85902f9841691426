"""Traversability-constrained Hybrid A* over a hybrid map, plus two baselines.

Search state is a continuous position with a CCW-positive heading taken
from the multiples of the primitive turn step. Poses are merged for
duplicate detection by ``(row, col, sector)`` with 16 heading sectors.
Each expansion drives ``K`` forward arcs of length ``L = resolution * sqrt(2)``;
the outermost arcs turn by ``pi / 8``.

Modes
-----
``t-hybrid``
    Obstacle and unknown cells are rejected from the 2D layer before any
    attitude work; surviving children are scored by real traversability.
``2d-baseline``
    Same search, collision checks only; cost is turning plus length.
``dem-baseline``
    Every cell under the robot footprint goes through the attitude pipeline
    at every arc sample, with no early exit on obstacle marks. The worst
    footprint cell sets the child's traversability.

The search heuristic is a per-cell bound on the cost of the remaining arcs,
which is consistent and constant inside a duplicate bucket. That makes the first goal pop
cost-optimal over the same bucketed graph that a plain Dijkstra explores.
"""
from __future__ import annotations

import csv
import heapq
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .attitude import roll_pitch, real_traversability
from .errors import DegenerateProjection, InvalidGoal, InvalidStart
from .hybrid_map import OBSTACLE, TERRAIN, UNKNOWN, HybridMap
from .robot import DEFAULT_SPEC, RobotSpec

MODES = ("t-hybrid", "2d-baseline", "dem-baseline")
SUCCESS, NO_PATH, LIMIT_EXCEEDED = "Success", "NoPath", "LimitExceeded"

HEADING_SECTORS = 16
MAX_TURN = math.pi / 8
GOAL_HEADING_TOL = 2 * math.pi / HEADING_SECTORS
_SECTOR = 2 * math.pi / HEADING_SECTORS
# sector edges sit half a primitive step away from multiples of pi/16
_SECTOR_OFFSET = math.pi / 32
# Collision is decided at the child cell (clearance beyond the robot radius).
# One extra mid-arc lookup stops an arc from hopping across a blocked cell
# between two free ones; corner clips smaller than that are not checked.
_ARC_SAMPLES = (0.5,)
_F_SLACK = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if t == -math.pi else t


def heading_sector(theta: float) -> int:
    return int(((theta + _SECTOR_OFFSET) % (2 * math.pi)) // _SECTOR) % HEADING_SECTORS


@dataclass(frozen=True)
class PlanNode:
    x: float
    y: float
    theta: float
    g: float = 0.0
    parent: "PlanNode | None" = field(default=None, repr=False, compare=False)
    primitive: int | None = None    # index into the curvature set, None at the start
    tau: float = 1.0                # real traversability at this pose
    roll: float = 0.0
    pitch: float = 0.0

    @property
    def pose(self):
        return (self.x, self.y, self.theta)


@dataclass(frozen=True, eq=False)
class PlanRequest:
    start: tuple
    goal: tuple
    map: HybridMap
    spec: RobotSpec = DEFAULT_SPEC
    mode: str = "t-hybrid"
    max_expansions: int = 200_000
    timeout: float | None = None
    num_primitives: int = 5
    paper_literal_cost: bool = False  # charge k * tau instead of k * (1 - tau)
    length_term: bool = True          # add arc length to g (and use the length heuristic)
    unknown_tau: float | None = None  # None keeps unknown cells impassable
    debug: bool = False               # assert popped f-values never decrease

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.num_primitives < 1 or self.num_primitives % 2 == 0:
            raise ValueError("num_primitives must be a positive odd number")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be positive")
        if self.unknown_tau is not None and not 0 < self.unknown_tau <= 1:
            raise ValueError("unknown_tau must lie in (0, 1]")
        for name in ("start", "goal"):
            pose = tuple(float(v) for v in getattr(self, name))
            if len(pose) != 3 or not all(math.isfinite(v) for v in pose):
                raise ValueError(f"{name} must be a finite (x, y, theta) triple")
            object.__setattr__(self, name, (pose[0], pose[1], normalize_angle(pose[2])))

    @property
    def arc_length(self) -> float:
        return self.map.resolution * math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class PlanResult:
    status: str
    waypoints: tuple = ()
    length: float = 0.0
    expansions: int = 0
    wall_time: float = 0.0
    mode: str = "t-hybrid"

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    @property
    def cost(self) -> float:
        return self.waypoints[-1].g if self.waypoints else math.inf

    def summary(self) -> dict:
        return {"status": self.status, "length": self.length,
                "expansions": self.expansions, "wall_time": self.wall_time}


# -- motion primitives ---------------------------------------------------------

def turn_angles(num_primitives: int = 5) -> tuple:
    """Heading change of each primitive, most-clockwise first."""
    if num_primitives == 1:
        return (0.0,)
    half = num_primitives // 2
    return tuple(MAX_TURN * k / half for k in range(-half, half + 1))


def _arc_point(dtheta, length, s):
    """Local-frame point after driving ``s * length`` along the arc."""
    if dtheta == 0.0:
        return s * length, 0.0
    kappa = dtheta / length
    a = dtheta * s
    return math.sin(a) / kappa, (1.0 - math.cos(a)) / kappa


# -- pose checks ------------------------------------------------------------------

class _Checker:
    """Map lookups shared by expand, start/goal validation and annotation."""

    def __init__(self, hmap: HybridMap, spec: RobotSpec, unknown_tau=None):
        self.map = hmap
        self.spec = spec
        self.unknown_tau = unknown_tau
        self.radius = spec.robot_radius
        self.r_max = hmap.max_roughness if hmap.max_roughness is not None else spec.max_roughness
        self.dist = hmap.distance_field
        self.kind = hmap.kind
        self.ox, self.oy = hmap.origin
        self.res = hmap.resolution
        self.rows, self.cols = hmap.shape

    def cell(self, x, y):
        i = math.floor((y - self.oy) / self.res)
        j = math.floor((x - self.ox) / self.res)
        if 0 <= i < self.rows and 0 <= j < self.cols:
            return i, j
        return None

    def passable_cell(self, i, j) -> bool:
        k = self.kind[i, j]
        if k == OBSTACLE:
            return False
        if k == UNKNOWN and self.unknown_tau is None:
            return False
        return self.dist[i, j] > self.radius

    def collides(self, x, y) -> bool:
        c = self.cell(x, y)
        return c is None or not self.passable_cell(*c)

    def attitude(self, i, j, theta):
        """``(tau, roll, pitch)`` for a heading on a passable cell."""
        if self.kind[i, j] != TERRAIN:
            return float(self.unknown_tau), 0.0, 0.0
        n = self.map.normal[i, j]
        try:
            roll, pitch = roll_pitch(theta, float(n[0]), float(n[1]), float(n[2]))
        except DegenerateProjection:
            return 0.0, math.nan, math.nan
        tau = real_traversability(float(self.map.r_sum[i, j]), (roll, pitch), self.spec, self.r_max)
        return tau, roll, pitch

    def footprint(self, x, y):
        """Cells whose square meets the robot's circumscribed disk at (x, y)."""
        res, rad = self.res, self.radius
        i0 = math.floor((y - rad - self.oy) / res)
        i1 = math.floor((y + rad - self.oy) / res)
        j0 = math.floor((x - rad - self.ox) / res)
        j1 = math.floor((x + rad - self.ox) / res)
        out = []
        for i in range(i0, i1 + 1):
            cy0 = self.oy + i * res
            dy = max(cy0 - y, 0.0, y - (cy0 + res))
            for j in range(j0, j1 + 1):
                cx0 = self.ox + j * res
                dx = max(cx0 - x, 0.0, x - (cx0 + res))
                if dx * dx + dy * dy <= rad * rad:
                    out.append((i, j))
        return out

    def footprint_eval(self, x, y, theta):
        """Full 2.5D evaluation of every footprint cell, no early exit.

        Returns ``(tau, roll, pitch)`` of the centre cell with ``tau``
        replaced by the footprint minimum; ``tau`` is 0 on any collision.
        """
        centre = self.cell(x, y)
        worst = 1.0
        blocked = centre is None
        roll = pitch = 0.0
        for i, j in self.footprint(x, y):
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                continue   # no data off the map; the centre cell check covers leaving it
            k = self.kind[i, j]
            if k == TERRAIN:
                t, r, p = self.attitude(i, j, theta)
            elif k == UNKNOWN and self.unknown_tau is not None:
                t, r, p = float(self.unknown_tau), 0.0, 0.0
            else:
                blocked = True
                continue
            worst = min(worst, t)
            if (i, j) == centre:
                roll, pitch = r, p
        if blocked or not self.passable_cell(*centre):
            return 0.0, roll, pitch
        return worst, roll, pitch


class SearchSpace:
    """The primitive graph explored for one request.

    Headings are integer indices ``k`` with ``theta = theta0 + k * unit``,
    so repeated turning never drifts. Arc offsets are precomputed per heading
    and attitude results are memoized per ``(cell, heading)``.
    """

    def __init__(self, hmap: HybridMap, spec: RobotSpec = DEFAULT_SPEC, mode: str = "t-hybrid",
                 theta0: float = 0.0, num_primitives: int = 5, unknown_tau=None,
                 paper_literal_cost=False, length_term=True):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if num_primitives < 1 or num_primitives % 2 == 0:
            raise ValueError("num_primitives must be a positive odd number")
        self.map, self.spec, self.mode = hmap, spec, mode
        self.chk = chk = _Checker(hmap, spec, unknown_tau)
        if chk.r_max is None and mode != "2d-baseline":
            raise ValueError("map has no max_roughness and the robot spec sets none")
        self.paper_literal_cost = paper_literal_cost
        self.length_term = length_term
        self.length = L = hmap.resolution * math.sqrt(2.0)
        half = num_primitives // 2
        self.n_head = n = HEADING_SECTORS * half if half else 1
        self.unit = unit = 2 * math.pi / n
        self.theta = [normalize_angle(theta0 + k * unit) for k in range(n)]
        self.sector = [heading_sector(t) for t in self.theta]
        self.moves = []
        for k in range(n):
            c, s = math.cos(self.theta[k]), math.sin(self.theta[k])
            row = []
            for m, dk in enumerate(range(-half, half + 1)):
                d = dk * unit
                k2 = (k + dk) % n
                samples = []
                for a in _ARC_SAMPLES:
                    px, py = _arc_point(d, L, a)
                    samples.append((c * px - s * py, s * px + c * py, k if a < 0.5 else k2))
                ex, ey = _arc_point(d, L, 1.0)
                base = spec.turn_cost * abs(d) + (L if length_term else 0.0)
                row.append((m, k2, c * ex - s * ey, s * ex + c * ey, tuple(samples), base))
            self.moves.append(tuple(row))
        passable = chk.kind != OBSTACLE
        if unknown_tau is None:
            passable &= chk.kind != UNKNOWN
        passable &= chk.dist > chk.radius
        self.passable = passable
        self._free = bytearray(passable.ravel().astype(np.uint8).tobytes())
        self._memo = {}
        self._k_tau = 0.0 if mode == "2d-baseline" else spec.traversability_cost

    # -- lookups

    def cell_id(self, x, y) -> int:
        chk = self.chk
        i = math.floor((y - chk.oy) / chk.res)
        j = math.floor((x - chk.ox) / chk.res)
        if 0 <= i < chk.rows and 0 <= j < chk.cols:
            return i * chk.cols + j
        return -1

    def _attitude(self, cid, k):
        key = cid * self.n_head + k
        out = self._memo.get(key)
        if out is None:
            i, j = divmod(cid, self.chk.cols)
            out = self.chk.attitude(i, j, self.theta[k])
            self._memo[key] = out
        return out

    def _footprint(self, x, y, k):
        """Worst traversability over every on-map cell under the robot, each
        one projected in full; 0 on any collision."""
        chk = self.chk
        worst = 1.0
        blocked = False
        for i, j in chk.footprint(x, y):
            if not (0 <= i < chk.rows and 0 <= j < chk.cols):
                continue
            kind = chk.kind[i, j]
            if kind == OBSTACLE or (kind == UNKNOWN and chk.unknown_tau is None):
                blocked = True
                continue
            tau = self._attitude(i * chk.cols + j, k)[0]
            if tau < worst:
                worst = tau
        return 0.0 if blocked else worst

    def state(self, x, y, k):
        """``(tau, roll, pitch)`` of the pose under this mode's rules, or None
        if the pose collides."""
        cid = self.cell_id(x, y)
        if cid < 0 or not self._free[cid]:
            return None
        if self.mode == "2d-baseline":
            return 1.0, 0.0, 0.0
        tau, roll, pitch = self._attitude(cid, k)
        if self.mode == "dem-baseline":
            tau = min(tau, self._footprint(x, y, k))
        return tau, roll, pitch

    def step_cost(self, base, tau):
        if self.paper_literal_cost:
            return base + self._k_tau * tau
        return base + self._k_tau * (1.0 - tau)

    def successors(self, x, y, k):
        """Surviving arcs from pose ``(x, y, theta[k])`` as tuples
        ``(primitive, x2, y2, k2, cell, tau, roll, pitch, step_cost)``."""
        out = []
        free = self._free
        mode = self.mode
        chk = self.chk
        ox, oy, res, rows, cols = chk.ox, chk.oy, chk.res, chk.rows, chk.cols
        floor = math.floor
        for m, k2, ex, ey, samples, base in self.moves[k]:
            cx, cy = x + ex, y + ey
            i = floor((cy - oy) / res)
            j = floor((cx - ox) / res)
            if not (0 <= i < rows and 0 <= j < cols):
                continue
            cid = i * cols + j
            if not free[cid]:
                continue
            ok = True
            for px, py, _ in samples:
                i = floor((y + py - oy) / res)
                j = floor((x + px - ox) / res)
                if not (0 <= i < rows and 0 <= j < cols and free[i * cols + j]):
                    ok = False
                    break
            if not ok:
                continue
            if mode == "2d-baseline":
                out.append((m, cx, cy, k2, cid, 1.0, 0.0, 0.0, base))
                continue
            tau, roll, pitch = self._attitude(cid, k2)
            if mode == "dem-baseline":
                # no early exit: the whole footprint is projected at every sample
                worst = min(tau, self._footprint(cx, cy, k2))
                for px, py, sk in samples:
                    worst = min(worst, self._footprint(x + px, y + py, sk))
                tau = worst
            if tau <= 0.0:
                continue
            out.append((m, cx, cy, k2, cid, tau, roll, pitch, self.step_cost(base, tau)))
        return out

    def at_goal(self, x, y, k, goal) -> bool:
        return (math.hypot(x - goal[0], y - goal[1]) <= self.chk.res
                and abs(normalize_angle(self.theta[k] - goal[2])) <= GOAL_HEADING_TOL)

    # -- heuristic

    def tau_upper_bound(self) -> np.ndarray:
        """Per-cell upper bound on real traversability over all headings.

        On a plane of slope ``rho`` any resting attitude has
        ``|roll| + |pitch| >= rho``, so the attitude penalty is at least the
        smaller per-radian weight times ``rho``.
        """
        chk, spec = self.chk, self.spec
        out = np.zeros(chk.kind.shape)
        terrain = chk.kind == TERRAIN
        if chk.unknown_tau is not None:
            out[chk.kind == UNKNOWN] = chk.unknown_tau
        if self.mode == "2d-baseline":
            return out
        n = chk.map.normal.astype(np.float64)
        nz = n[..., 2] / np.linalg.norm(np.where(terrain[..., None], n, 1.0), axis=-1)
        rho = np.arccos(np.clip(nz, -1.0, 1.0)) * (1.0 - 1e-9) - 1e-12
        per_rad = min(spec.roll_weight / spec.max_roll,
                      spec.pitch_weight / max(-spec.min_pitch, spec.max_pitch))
        r = chk.map.r_sum.astype(np.float64)
        ub = 1.0 - spec.roughness_weight * r / chk.r_max - per_rad * np.maximum(rho, 0.0)
        ub = np.clip(ub, 0.0, 1.0)
        out[terrain] = ub[terrain]
        return out

    def heuristic_field(self, goal) -> np.ndarray:
        """Per-cell lower bound on the remaining cost to ``goal``.

        One primitive moves at most 1.41 cells, so it changes each cell index
        by at most 2. Over passable cells joined by such 5x5 hops, a reverse
        Dijkstra charges each hop the least any arc into the target cell can
        cost. The bound is consistent and constant within a cell.
        """
        shape = self.chk.kind.shape
        if not self.length_term:
            return np.zeros(shape)
        rows, cols = shape
        weight = np.full(shape, self.length)
        if not self.paper_literal_cost:
            weight = weight + self._k_tau * (1.0 - self.tau_upper_bound())
        weight = weight - 1e-9 * self.length
        idx = np.arange(rows * cols).reshape(shape)
        free = self.passable
        src, dst, w = [], [], []
        for di in range(-2, 3):
            for dj in range(-2, 3):
                if di == dj == 0:
                    continue
                # parent p -> child c = p + (di, dj); reverse edge c -> p weighs w(c)
                p = idx[max(0, -di):rows - max(0, di), max(0, -dj):cols - max(0, dj)].ravel()
                c = idx[max(0, di):rows + min(0, di), max(0, dj):cols + min(0, dj)].ravel()
                ok = free.ravel()[p] & free.ravel()[c]
                src.append(c[ok])
                dst.append(p[ok])
                w.append(weight.ravel()[c[ok]])
        graph = csr_matrix((np.concatenate(w), (np.concatenate(src), np.concatenate(dst))),
                           shape=(rows * cols, rows * cols))
        sources = np.flatnonzero((_goal_cells(self.chk, goal) & free).ravel())
        if len(sources) == 0:
            return np.full(shape, np.inf)
        h = dijkstra(graph, indices=sources, min_only=True).reshape(shape)
        goal_mask = _goal_cells(self.chk, goal)
        h[goal_mask] = 0.0
        return h


# -- expansion and cost ------------------------------------------------------------

def expand(node: PlanNode, hmap: HybridMap, spec: RobotSpec = DEFAULT_SPEC,
           mode: str = "t-hybrid", num_primitives: int = 5, unknown_tau=None,
           paper_literal_cost=False, length_term=True) -> list:
    """Children of ``node`` that survive collision and traversability checks,
    with ``g`` already accumulated."""
    space = SearchSpace(hmap, spec, mode, node.theta, num_primitives, unknown_tau,
                        paper_literal_cost, length_term)
    return [PlanNode(x, y, space.theta[k], node.g + cost, node, m, tau, roll, pitch)
            for m, x, y, k, _, tau, roll, pitch, cost in space.successors(node.x, node.y, 0)]


def node_cost(parent: PlanNode, child: PlanNode, spec: RobotSpec = DEFAULT_SPEC,
              length: float = 0.5 * math.sqrt(2.0), mode: str = "t-hybrid",
              paper_literal_cost=False, length_term=True, d_o=None) -> float:
    """Cost increment from ``parent`` to ``child``; ``inf`` means pruned.

    ``d_o`` is the child's clearance beyond the robot radius when known; a
    value of 0 or less, or ``child.tau == 0`` outside the 2D baseline, is
    infinite.
    """
    if d_o is not None and d_o <= 0:
        return math.inf
    if mode != "2d-baseline" and child.tau <= 0.0:
        return math.inf
    base = spec.turn_cost * abs(normalize_angle(child.theta - parent.theta))
    if length_term:
        base += length
    if mode == "2d-baseline":
        return base
    k = spec.traversability_cost
    return base + k * (child.tau if paper_literal_cost else 1.0 - child.tau)


# -- heuristics ------------------------------------------------------------------

def _grid_graph(hmap: HybridMap):
    cache = hmap._cache
    graph = cache.get("grid_graph")
    if graph is None:
        rows, cols = hmap.shape
        free = (hmap.kind != OBSTACLE).ravel()
        idx = np.arange(rows * cols).reshape(rows, cols)
        src, dst, w = [], [], []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == dj == 0:
                    continue
                a = idx[max(0, -di):rows - max(0, di), max(0, -dj):cols - max(0, dj)].ravel()
                b = idx[max(0, di):rows + min(0, di), max(0, dj):cols + min(0, dj)].ravel()
                ok = free[a] & free[b]
                src.append(a[ok])
                dst.append(b[ok])
                w.append(np.full(ok.sum(), hmap.resolution * math.hypot(di, dj)))
        graph = csr_matrix((np.concatenate(w), (np.concatenate(src), np.concatenate(dst))),
                           shape=(rows * cols, rows * cols))
        cache["grid_graph"] = graph
    return graph


def grid_distance(hmap: HybridMap, goal_cell) -> np.ndarray:
    """8-connected shortest-path distance (m) from ``goal_cell`` over
    non-obstacle cells; ``inf`` where unreachable. Cached per goal cell."""
    key = ("grid_distance", tuple(goal_cell))
    field_ = hmap._cache.get(key)
    if field_ is None:
        i, j = goal_cell
        rows, cols = hmap.shape
        if hmap.kind[i, j] == OBSTACLE:
            field_ = np.full(hmap.shape, np.inf)
        else:
            field_ = dijkstra(_grid_graph(hmap), indices=i * cols + j).reshape(rows, cols)
        field_.setflags(write=False)
        hmap._cache[key] = field_
    return field_


def heuristic(pose, goal, hmap: HybridMap) -> float:
    """max(Euclidean distance, obstacle-aware grid distance) from ``pose`` to ``goal``.

    The grid part runs one reverse Dijkstra per goal cell and is cached on
    the map. The search itself uses :meth:`SearchSpace.heuristic_field`,
    which is weaker per step but consistent under heading-sector merging.
    """
    euclid = math.hypot(goal[0] - pose[0], goal[1] - pose[1])
    gi, gj = hmap.cell_index(goal[0], goal[1])
    pi, pj = hmap.cell_index(pose[0], pose[1])
    if not (hmap.in_bounds(gi, gj) and hmap.in_bounds(pi, pj)):
        return euclid
    return max(euclid, float(grid_distance(hmap, (gi, gj))[pi, pj]))


def _goal_cells(chk: _Checker, goal):
    """Cells whose square comes within one resolution of the goal point."""
    gx, gy = goal[0], goal[1]
    res = chk.res
    mask = np.zeros((chk.rows, chk.cols), bool)
    gi, gj = math.floor((gy - chk.oy) / res), math.floor((gx - chk.ox) / res)
    for i in range(gi - 2, gi + 3):
        for j in range(gj - 2, gj + 3):
            if not (0 <= i < chk.rows and 0 <= j < chk.cols):
                continue
            x0, y0 = chk.ox + j * res, chk.oy + i * res
            dx = max(x0 - gx, 0.0, gx - (x0 + res))
            dy = max(y0 - gy, 0.0, gy - (y0 + res))
            if math.hypot(dx, dy) <= res:
                mask[i, j] = True
    return mask


# -- search ----------------------------------------------------------------------

def _validate_endpoint(chk, pose, mode, error, label):
    x, y, theta = pose
    c = chk.cell(x, y)
    if c is None:
        raise error(f"{label} ({x:g}, {y:g}) is outside the map")
    if not chk.passable_cell(*c):
        raise error(f"{label} ({x:g}, {y:g}) is on an obstacle, unknown, or too close to an obstacle")
    if mode == "2d-baseline":
        return 1.0, 0.0, 0.0
    tau, roll, pitch = chk.attitude(c[0], c[1], theta)
    if mode == "dem-baseline":
        tau = min(tau, chk.footprint_eval(x, y, theta)[0])
    if tau <= 0.0:
        raise error(f"{label} pose has zero traversability at heading {theta:g}")
    return tau, roll, pitch


def annotate(chk: _Checker, x, y, theta):
    """Real traversability state at a pose, independent of search mode."""
    c = chk.cell(x, y)
    if c is None or chk.kind[c] == OBSTACLE:
        return 0.0, math.nan, math.nan
    if chk.kind[c] == UNKNOWN:
        return (0.0 if chk.unknown_tau is None else float(chk.unknown_tau)), 0.0, 0.0
    return chk.attitude(c[0], c[1], theta)


def plan(request: PlanRequest) -> PlanResult:
    """Best-first search from ``request.start`` to within one cell and one
    heading sector of ``request.goal``."""
    t0 = time.perf_counter()
    mode = request.mode
    space = SearchSpace(request.map, request.spec, mode, request.start[2],
                        request.num_primitives, request.unknown_tau,
                        request.paper_literal_cost, request.length_term)
    chk = space.chk
    start_state = _validate_endpoint(chk, request.start, mode, InvalidStart, "start")
    _validate_endpoint(chk, request.goal, mode, InvalidGoal, "goal")
    h_cell = space.heuristic_field(request.goal).ravel().tolist()
    goal = request.goal
    sector = space.sector

    # node table: parallel lists indexed by node id
    xs, ys, ks, gs, parents, prim_of, states = [], [], [], [], [], [], []

    sx, sy, _ = request.start
    scid = space.cell_id(sx, sy)
    if not math.isfinite(h_cell[scid]):
        return PlanResult(NO_PATH, (), 0.0, 0, time.perf_counter() - t0, mode)
    xs.append(sx); ys.append(sy); ks.append(0); gs.append(0.0)
    parents.append(-1); prim_of.append(None); states.append(start_state)
    best = {}           # bucket -> (g, x, y, k, node id) of the open label
    closed = set()
    sb = (scid, sector[0])
    best[sb] = (0.0, sx, sy, 0, 0)
    heap = [(h_cell[scid], -0.0, scid, sector[0], 0)]
    expansions = 0
    last_f = -math.inf
    deadline = None if request.timeout is None else t0 + request.timeout
    max_exp = request.max_expansions

    while heap:
        f, _, cid, sec, nid = heapq.heappop(heap)
        bucket = (cid, sec)
        if bucket in closed or best[bucket][4] != nid:
            continue
        if request.debug:
            assert f >= last_f - _F_SLACK, f"popped f decreased: {f} < {last_f}"
            last_f = f
        x, y, k = xs[nid], ys[nid], ks[nid]
        if space.at_goal(x, y, k, goal):
            return _result(SUCCESS, nid, space, xs, ys, ks, gs, parents, prim_of, states,
                           expansions, t0)
        closed.add(bucket)
        del best[bucket]
        if expansions >= max_exp or (deadline is not None and time.perf_counter() > deadline):
            return PlanResult(LIMIT_EXCEEDED, (), 0.0, expansions, time.perf_counter() - t0, mode)
        expansions += 1
        g = gs[nid]
        for m, cx, cy, ck, ccid, tau, roll, pitch, cost in space.successors(x, y, k):
            h = h_cell[ccid]
            if h == math.inf:
                continue
            cb = (ccid, sector[ck])
            if cb in closed:
                continue
            cg = g + cost
            old = best.get(cb)
            if old is not None and old[:4] <= (cg, cx, cy, ck):
                continue
            cid2 = len(xs)
            xs.append(cx); ys.append(cy); ks.append(ck); gs.append(cg)
            parents.append(nid); prim_of.append(m); states.append((tau, roll, pitch))
            best[cb] = (cg, cx, cy, ck, cid2)
            heapq.heappush(heap, (cg + h, -cg, ccid, cb[1], cid2))
    return PlanResult(NO_PATH, (), 0.0, expansions, time.perf_counter() - t0, mode)


def _result(status, nid, space, xs, ys, ks, gs, parents, prim_of, states, expansions, t0):
    chain = []
    while nid >= 0:
        chain.append(nid)
        nid = parents[nid]
    chain.reverse()
    nodes = []
    parent = None
    for n in chain:
        theta = space.theta[ks[n]]
        if space.mode == "t-hybrid":
            tau, roll, pitch = states[n]
        else:
            # baselines report the real traversability of the centre cell
            tau, roll, pitch = annotate(space.chk, xs[n], ys[n], theta)
        parent = PlanNode(xs[n], ys[n], theta, gs[n], parent, prim_of[n], tau, roll, pitch)
        nodes.append(parent)
    wall = time.perf_counter() - t0
    return PlanResult(status, tuple(nodes), space.length * (len(nodes) - 1), expansions, wall,
                      space.mode)


def plan_baseline_2d(request: PlanRequest) -> PlanResult:
    return plan(replace(request, mode="2d-baseline"))


def plan_baseline_dem(request: PlanRequest) -> PlanResult:
    return plan(replace(request, mode="dem-baseline"))


# -- output -----------------------------------------------------------------------

PATH_COLUMNS = ("x", "y", "theta", "roll", "pitch", "tau_real", "cumulative_length")


def path_rows(result: PlanResult, arc_length: float | None = None):
    if arc_length is None:
        n = len(result.waypoints)
        arc_length = result.length / (n - 1) if n > 1 else 0.0
    for k, w in enumerate(result.waypoints):
        yield (w.x, w.y, w.theta, w.roll, w.pitch, w.tau, k * arc_length)


def write_path_csv(result: PlanResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATH_COLUMNS)
        for row in path_rows(result):
            writer.writerow([repr(float(v)) for v in row])


def write_summary_json(result: PlanResult, path, extra: dict | None = None,
                       timing: bool = False) -> None:
    """Summary JSON; wall time is left out unless ``timing`` so that repeated
    runs write identical bytes."""
    data = result.summary()
    if not timing:
        del data["wall_time"]
    data["mode"] = result.mode
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- estimator wrapper ----------------------------------------------------------------

class THybridAStar(BaseEstimator):
    """Planner as an estimator: ``fit`` takes a :class:`HybridMap`,
    ``predict`` takes rows of ``(sx, sy, stheta, gx, gy, gtheta)`` and returns
    one :class:`PlanResult` per row."""

    def __init__(self, spec=None, mode="t-hybrid", max_expansions=200_000, timeout=None,
                 num_primitives=5, paper_literal_cost=False, length_term=True,
                 unknown_tau=None):
        self.spec = spec
        self.mode = mode
        self.max_expansions = max_expansions
        self.timeout = timeout
        self.num_primitives = num_primitives
        self.paper_literal_cost = paper_literal_cost
        self.length_term = length_term
        self.unknown_tau = unknown_tau

    def fit(self, X, y=None):
        if not isinstance(X, HybridMap):
            raise TypeError("THybridAStar.fit expects a HybridMap")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.map_ = X
        self.map_.distance_field  # build once up front
        return self

    def request(self, start, goal) -> PlanRequest:
        check_is_fitted(self, "map_")
        return PlanRequest(start, goal, self.map_, self.spec or DEFAULT_SPEC, self.mode,
                           self.max_expansions, self.timeout, self.num_primitives,
                           self.paper_literal_cost, self.length_term, self.unknown_tau)

    def plan(self, start, goal) -> PlanResult:
        return plan(self.request(start, goal))

    def predict(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 6:
            raise ValueError("expected rows of (sx, sy, stheta, gx, gy, gtheta)")
        return [self.plan(row[:3], row[3:]) for row in X]
