"""Independent reference searches used by the planner tests."""
import heapq
import math

from thybrid.planner import SearchSpace


def exhaustive_dijkstra(request, stop_at_goal=True):
    """Plain uniform-cost search over the bucketed primitive graph.

    Uses the planner's successor function but none of its search code: no
    heuristic, same bucket rule (a bucket keeps the lexicographically smallest
    ``(g, x, y, k)`` label, and is never reopened once settled). Returns
    ``(goal_cost, settled_buckets)``; ``goal_cost`` is ``inf`` without a path.
    """
    space = SearchSpace(request.map, request.spec, request.mode, request.start[2],
                        request.num_primitives, request.unknown_tau,
                        request.paper_literal_cost, request.length_term)
    sx, sy, _ = request.start
    start = (space.cell_id(sx, sy), space.sector[0])
    best = {start: (0.0, sx, sy, 0)}
    heap = [(0.0, sx, sy, 0, start)]
    settled = set()
    goal_cost = math.inf
    while heap:
        g, x, y, k, bucket = heapq.heappop(heap)
        if bucket in settled or best[bucket] != (g, x, y, k):
            continue
        settled.add(bucket)
        if space.at_goal(x, y, k, request.goal):
            goal_cost = min(goal_cost, g)
            if stop_at_goal:
                break
        for _, cx, cy, ck, cid, _, _, _, cost in space.successors(x, y, k):
            cb = (cid, space.sector[ck])
            if cb in settled:
                continue
            label = (g + cost, cx, cy, ck)
            old = best.get(cb)
            if old is not None and old <= label:
                continue
            best[cb] = label
            heapq.heappush(heap, label + (cb,))
    return goal_cost, len(settled)
