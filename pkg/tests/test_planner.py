import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_map, gentle_map, make_map, ramp_normal
from oracles import exhaustive_dijkstra
from thybrid.attitude import attitude_for_heading, real_traversability
from thybrid.errors import InvalidGoal, InvalidStart
from thybrid.hybrid_map import OBSTACLE, TERRAIN, UNKNOWN
from thybrid.planner import (GOAL_HEADING_TOL, MAX_TURN, MODES, NO_PATH, LIMIT_EXCEEDED,
                             SUCCESS, PlanNode, PlanRequest, THybridAStar, _Checker,
                             _validate_endpoint, expand, heading_sector, heuristic, node_cost,
                             normalize_angle, plan, plan_baseline_2d, plan_baseline_dem,
                             turn_angles, write_path_csv)
from thybrid.robot import DEFAULT_SPEC

L = 0.5 * math.sqrt(2)


def test_normalize_angle_range():
    assert normalize_angle(-math.pi) == math.pi
    assert normalize_angle(3 * math.pi) == math.pi
    assert normalize_angle(0.1 - 4 * math.pi) == pytest.approx(0.1)


@given(st.floats(-100, 100))
def test_normalize_and_sector(theta):
    t = normalize_angle(theta)
    assert -math.pi < t <= math.pi
    assert 0 <= heading_sector(theta) < 16


def test_turn_angles():
    assert turn_angles(5) == (-MAX_TURN, -MAX_TURN / 2, 0.0, MAX_TURN / 2, MAX_TURN)
    assert turn_angles(1) == (0.0,)


# -- expand -------------------------------------------------------------------------

def test_expand_flat_symmetric():
    node = PlanNode(5.25, 5.25, 0.3)
    kids = expand(node, flat_map(20, 20))
    assert len(kids) == 5
    assert all(k.tau == 1.0 for k in kids)
    turns = sorted(normalize_angle(k.theta - node.theta) for k in kids)
    assert turns == pytest.approx([-MAX_TURN, -MAX_TURN / 2, 0.0, MAX_TURN / 2, MAX_TURN])
    for k in kids:
        assert math.hypot(k.x - node.x, k.y - node.y) <= L + 1e-12
    # mirrored children are equidistant from the straight one
    by_turn = {round(normalize_angle(k.theta - node.theta), 9): k for k in kids}
    straight = by_turn[0.0]
    for a in (MAX_TURN, MAX_TURN / 2):
        left, right = by_turn[round(a, 9)], by_turn[round(-a, 9)]
        assert math.dist((left.x, left.y), (straight.x, straight.y)) == pytest.approx(
            math.dist((right.x, right.y), (straight.x, straight.y)), abs=1e-12)


def test_expand_wall_ahead():
    kind = np.full((10, 10), TERRAIN)
    kind[4, 5] = OBSTACLE
    hmap = make_map(kind)
    # parent sits in cell (4, 4), close to its upper edge; the obstacle is
    # straight ahead, so only arcs turning left reach a free cell
    kids = expand(PlanNode(2.05, 2.45, 0.0), hmap)
    assert sorted(k.primitive for k in kids) == [3, 4]
    chk = _Checker(hmap, DEFAULT_SPEC)
    for k in kids:
        assert not chk.collides(k.x, k.y)
        assert hmap.distance_to_obstacle(k.x, k.y) > DEFAULT_SPEC.robot_radius


def test_expand_across_slope_discards_rolled_children():
    alpha = 0.2
    normal = ramp_normal(alpha)
    hmap = make_map(np.full((20, 20), TERRAIN), normal=normal)
    node = PlanNode(5.25, 5.25, math.pi / 2)
    kids = expand(node, hmap)
    got = {k.primitive for k in kids}
    # oracle: an arc survives iff its end heading keeps the pose within limits
    want = {m for m, d in enumerate(turn_angles(5))
            if real_traversability(0.0, attitude_for_heading(node.theta + d, normal),
                                   DEFAULT_SPEC, 2.5) > 0}
    assert got == want
    assert 2 not in got           # driving straight across: |roll| = 0.2 > 0.18
    up = expand(PlanNode(5.25, 5.25, 0.0), hmap)
    assert len(up) == 5


def test_expand_unknown_cells():
    kind = np.full((10, 10), TERRAIN)
    kind[:, 5:] = UNKNOWN
    hmap = make_map(kind)
    node = PlanNode(2.3, 2.25, 0.0)
    assert expand(node, hmap) == []
    kids = expand(node, hmap, unknown_tau=0.5)
    assert len(kids) == 5 and all(k.tau in (0.5, 1.0) for k in kids)


def test_expand_g_accumulates():
    node = PlanNode(5.25, 5.25, 0.0, g=3.0)
    for k in expand(node, flat_map(20, 20)):
        assert k.g == pytest.approx(3.0 + DEFAULT_SPEC.turn_cost * abs(turn_angles(5)[k.primitive]) + L)
        assert k.parent is node


# -- node cost ----------------------------------------------------------------------

def test_node_cost_examples():
    parent = PlanNode(0, 0, 0.0)
    assert node_cost(parent, PlanNode(L, 0, 0.0, tau=1.0), d_o=0.0) == math.inf
    assert node_cost(parent, PlanNode(L, 0, 0.0, tau=0.0)) == math.inf
    assert node_cost(parent, PlanNode(L, 0, 0.0, tau=1.0)) == L
    good = node_cost(parent, PlanNode(L, 0, 0.0, tau=1.0))
    worse = node_cost(parent, PlanNode(L, 0, 0.0, tau=0.5))
    assert worse - good == pytest.approx(1.0)


def test_node_cost_variants():
    parent = PlanNode(0, 0, 0.0)
    child = PlanNode(L, 0, 0.2, tau=0.5)
    assert node_cost(parent, child, mode="2d-baseline") == pytest.approx(1.1 * 0.2 + L)
    assert node_cost(parent, child, paper_literal_cost=True) == pytest.approx(1.1 * 0.2 + L + 1.0)
    assert node_cost(parent, child, length_term=False) == pytest.approx(1.1 * 0.2 + 1.0)
    assert node_cost(parent, child, d_o=0.01) < math.inf


# -- heuristic ----------------------------------------------------------------------

def _nx_grid_distance(hmap, a, b):
    g = nx.Graph()
    rows, cols = hmap.shape
    for i in range(rows):
        for j in range(cols):
            if hmap.kind[i, j] == OBSTACLE:
                continue
            for di, dj in ((0, 1), (1, 0), (1, 1), (1, -1)):
                p, q = i + di, j + dj
                if 0 <= p < rows and 0 <= q < cols and hmap.kind[p, q] != OBSTACLE:
                    g.add_edge((i, j), (p, q), weight=hmap.resolution * math.hypot(di, dj))
    try:
        return nx.dijkstra_path_length(g, a, b)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return math.inf


def test_heuristic_examples():
    hmap = flat_map(40, 40)
    assert heuristic((5.0, 5.0, 0.0), (5.0, 5.0, 0.0), hmap) == 0
    assert heuristic((2.25, 5.25, 0.0), (12.25, 5.25, 0.0), hmap) == pytest.approx(10.0)


def test_heuristic_u_wall():
    kind = np.full((20, 20), TERRAIN)
    kind[4:16, 12] = OBSTACLE      # back of the U
    kind[4, 6:13] = OBSTACLE
    kind[15, 6:13] = OBSTACLE
    hmap = make_map(kind)
    pose, goal = (4.75, 4.75, 0.0), (8.25, 4.75, 0.0)   # inside the U, then behind it
    h = heuristic(pose, goal, hmap)
    euclid = math.dist(pose[:2], goal[:2])
    oracle = _nx_grid_distance(hmap, hmap.cell_index(*pose[:2]), hmap.cell_index(*goal[:2]))
    assert h == pytest.approx(oracle, abs=1e-12)
    assert h > euclid


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_heuristic_matches_networkx(seed):
    rng = np.random.default_rng(seed)
    hmap = gentle_map(rng, 12, 12, obstacle_p=0.2)
    a = (rng.uniform(0, 6), rng.uniform(0, 6), 0.0)
    b = (rng.uniform(0, 6), rng.uniform(0, 6), 0.0)
    ca, cb = hmap.cell_index(*a[:2]), hmap.cell_index(*b[:2])
    oracle = _nx_grid_distance(hmap, ca, cb)
    if hmap.kind[cb] == OBSTACLE:
        oracle = math.inf
    assert heuristic(a, b, hmap) == pytest.approx(max(oracle, math.dist(a[:2], b[:2])), abs=1e-12)


# -- plan ---------------------------------------------------------------------------

def test_plan_flat_straight():
    res = plan(PlanRequest((5.0, 10.0, 0.0), (15.0, 10.0, 0.0), flat_map(40, 40), debug=True))
    assert res.status == SUCCESS
    assert res.length <= 10.5
    assert math.hypot(res.waypoints[-1].x - 15.0, res.waypoints[-1].y - 10.0) <= 0.5
    assert res.length == pytest.approx(L * (len(res.waypoints) - 1))


def test_plan_enclosed_start():
    kind = np.full((30, 30), TERRAIN)
    kind[10, 10:21] = OBSTACLE
    kind[20, 10:21] = OBSTACLE
    kind[10:21, 10] = OBSTACLE
    kind[10:21, 20] = OBSTACLE
    res = plan(PlanRequest((7.6, 7.6, 0.0), (2.0, 2.0, 0.0), make_map(kind)))
    assert res.status == NO_PATH and res.waypoints == ()


def test_plan_invalid_endpoints():
    kind = np.full((20, 20), TERRAIN)
    kind[5, 5] = OBSTACLE
    hmap = make_map(kind)
    with pytest.raises(InvalidStart):
        plan(PlanRequest((2.75, 2.75, 0.0), (8.0, 8.0, 0.0), hmap))
    with pytest.raises(InvalidGoal):
        plan(PlanRequest((8.0, 8.0, 0.0), (2.75, 2.75, 0.0), hmap))
    with pytest.raises(InvalidStart):
        plan(PlanRequest((-1.0, 2.0, 0.0), (8.0, 8.0, 0.0), hmap))
    # zero traversability at the requested heading
    steep = make_map(np.full((20, 20), TERRAIN), normal=ramp_normal(0.2))
    with pytest.raises(InvalidStart):
        plan(PlanRequest((5.0, 5.0, math.pi / 2), (8.0, 5.0, 0.0), steep))
    with pytest.raises(ValueError):
        PlanRequest((0, 0, 0), (1, 1, 0), hmap, mode="bogus")


def test_plan_limit_exceeded():
    res = plan(PlanRequest((2.0, 2.0, 0.0), (18.0, 18.0, 0.0), flat_map(40, 40), max_expansions=3))
    assert res.status == LIMIT_EXCEEDED and res.expansions == 3
    res = plan(PlanRequest((2.0, 2.0, 0.0), (18.0, 18.0, 0.0), flat_map(40, 40), timeout=0.0))
    assert res.status == LIMIT_EXCEEDED


def test_all_modes_equal_on_flat():
    hmap = flat_map(40, 40)
    lengths = [plan(PlanRequest((5.0, 10.0, 0.0), (15.0, 10.0, 0.0), hmap, mode=m)).length
               for m in MODES]
    assert max(lengths) - min(lengths) <= 1e-9
    req = PlanRequest((3.0, 3.0, 0.5), (15.0, 12.0, 1.0), hmap)
    assert plan_baseline_2d(req).length == pytest.approx(plan(req).length, abs=1e-9)
    assert plan_baseline_dem(req).mode == "dem-baseline"


def test_two_corridor_prefers_safer(assessed):
    est, _ = assessed("two_corridor")
    req = PlanRequest((4.0, 5.0, 0.0), (26.0, 17.0, 0.0), est.map_)
    ours, base = plan(req), plan_baseline_2d(req)
    assert ours.success and base.success
    assert min(w.tau for w in ours.waypoints) > min(w.tau for w in base.waypoints)


def test_plan_deterministic(assessed):
    est, _ = assessed("rough")
    req = PlanRequest((3.0, 3.0, 0.8), (26.0, 26.0, 0.8), est.map_)
    a, b = plan(req), plan(req)
    assert a.success
    assert [w.pose for w in a.waypoints] == [w.pose for w in b.waypoints]
    assert a.expansions == b.expansions


def _check_path(res, hmap, spec=DEFAULT_SPEC):
    ws = res.waypoints
    for w in ws:
        cell = hmap.query(w.x, w.y)
        assert cell.is_terrain
        assert hmap.distance_to_obstacle(w.x, w.y) > spec.robot_radius
        assert w.tau > 0
    for a, b in zip(ws, ws[1:]):
        assert abs(normalize_angle(b.theta - a.theta)) <= MAX_TURN + 1e-12
        assert math.dist((a.x, a.y), (b.x, b.y)) <= L + 1e-12
        assert b.g >= a.g
        assert b.parent is a


def _valid_pose(rng, hmap, mode):
    chk = _Checker(hmap, DEFAULT_SPEC)
    for _ in range(500):
        p = (rng.uniform(0, hmap.extent[1]), rng.uniform(0, hmap.extent[3]), rng.uniform(-math.pi, math.pi))
        try:
            _validate_endpoint(chk, p, mode, InvalidStart, "pose")
            return p
        except InvalidStart:
            pass
    return None


def exact_case(rng, mode, min_cells=14, max_cells=25):
    """A random small map plus endpoints that the oracle can connect."""
    while True:
        hmap = gentle_map(rng, int(rng.integers(min_cells, max_cells)), int(rng.integers(min_cells, max_cells)))
        for _ in range(40):
            s, g = _valid_pose(rng, hmap, mode), _valid_pose(rng, hmap, mode)
            if s is None or g is None or math.dist(s[:2], g[:2]) < 3.0:
                continue
            req = PlanRequest(s, g, hmap, mode=mode, debug=True)
            cost, _ = exhaustive_dijkstra(req)
            if cost < math.inf:
                return req, cost


@pytest.mark.parametrize("seed", range(6))
def test_plan_matches_exhaustive_dijkstra(seed):
    rng = np.random.default_rng([seed, 17])
    mode = MODES[seed % 3]
    req, cost = exact_case(rng, mode)
    assert exhaustive_dijkstra(req, stop_at_goal=False)[1] <= 10_000
    res = plan(req)
    assert res.success and res.cost == cost
    _check_path(res, req.map)


@given(st.integers(0, 2**32 - 1), st.sampled_from(MODES))
@settings(max_examples=20, deadline=None)
def test_plan_invariants_random(seed, mode):
    rng = np.random.default_rng(seed)
    hmap = gentle_map(rng, 20, 20)
    s, g = _valid_pose(rng, hmap, mode), _valid_pose(rng, hmap, mode)
    if s is None or g is None:
        return
    req = PlanRequest(s, g, hmap, mode=mode, debug=True)
    res = plan(req)
    oracle, _ = exhaustive_dijkstra(req)
    if res.success:
        assert res.cost == oracle
        _check_path(res, hmap)
        assert abs(normalize_angle(res.waypoints[-1].theta - g[2])) <= GOAL_HEADING_TOL
    else:
        assert res.status == NO_PATH and oracle == math.inf


def test_paper_literal_and_no_length_options():
    hmap = flat_map(30, 30)
    req = PlanRequest((3.0, 7.0, 0.0), (11.0, 7.0, 0.0), hmap, paper_literal_cost=True)
    res = plan(req)
    assert res.success and res.cost == exhaustive_dijkstra(req)[0]
    req = PlanRequest((3.0, 7.0, 0.0), (11.0, 7.0, 0.0), hmap, length_term=False, max_expansions=50_000)
    res = plan(req)
    assert res.success and res.cost == exhaustive_dijkstra(req)[0]


def test_path_csv(tmp_path):
    res = plan(PlanRequest((5.0, 10.0, 0.0), (15.0, 10.0, 0.0), flat_map(40, 40)))
    path = tmp_path / "p.csv"
    write_path_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,theta,roll,pitch,tau_real,cumulative_length"
    cum = [float(r.split(",")[-1]) for r in lines[1:]]
    assert cum[0] == 0.0 and all(b > a for a, b in zip(cum, cum[1:]))
    assert cum[-1] == pytest.approx(res.length)


def test_estimator_wrapper():
    est = THybridAStar(max_expansions=10_000).fit(flat_map(40, 40))
    assert est.get_params()["mode"] == "t-hybrid"
    out = est.predict([[5.0, 10.0, 0.0, 15.0, 10.0, 0.0]])
    assert len(out) == 1 and out[0].success
    with pytest.raises(TypeError):
        THybridAStar().fit(np.zeros((3, 3)))
