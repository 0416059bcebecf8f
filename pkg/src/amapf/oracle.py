"""Brute-force ground truth for small instances.

Nothing here touches the solver's planners or assignment code: distances
come from a private breadth-first search and collision-free costs from an
exhaustive joint-state search.
"""
from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass

from .grid import Instance

MAX_ENUM_ROBOTS = 6
MAX_JOINT_ROBOTS = 4
MAX_JOINT_CELLS = 64


class OracleSizeError(ValueError):
    pass


def _bfs(ws, goal) -> dict:
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        x, y = queue.popleft()
        for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if ws.is_free(n) and n not in dist:
                dist[n] = dist[(x, y)] + 1
                queue.append(n)
    return dist


def _goal_fields(instance: Instance) -> list[dict]:
    return [_bfs(instance.workspace, tuple(g)) for g in instance.goals]


def enumerate_matchings(instance: Instance) -> list[tuple[tuple, int]]:
    """Every injective robot-to-goal mapping with its unconstrained cost.

    Mappings using an unreachable pair are left out. Sorted by cost, then
    goal vector.
    """
    n = instance.num_robots
    if n > MAX_ENUM_ROBOTS:
        raise OracleSizeError(f"{n} robots exceeds the enumeration limit {MAX_ENUM_ROBOTS}")
    fields = _goal_fields(instance)
    starts = [tuple(s) for s in instance.starts]
    out = []
    for M in itertools.permutations(range(instance.num_goals), n):
        costs = [fields[g].get(starts[r]) for r, g in enumerate(M)]
        if any(c is None for c in costs):
            continue
        out.append((M, sum(costs)))
    out.sort(key=lambda item: (item[1], item[0]))
    return out


def _neighbours(ws, c):
    x, y = c
    out = [c]
    for n in ((x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)):
        if ws.is_free(n):
            out.append(n)
    return out


def joint_optimal(instance: Instance, M, cap=None, fields=None):
    """Optimal collision-free sum of costs for the fixed matching ``M``.

    Joint A* over (positions, parked flags). A robot standing on its goal
    may park: it stays there for good and stops paying. Each step costs one
    per robot not yet parked, which meters every robot by its final
    arrival. Returns ``(cost, paths)`` or ``None`` if no plan costs at most
    ``cap``; without a cap the finite state space is searched exhaustively.
    """
    ws = instance.workspace
    n = instance.num_robots
    if fields is None:
        fields = _goal_fields(instance)
    goals = [tuple(instance.goals[g]) for g in M]
    dists = [fields[g] for g in M]
    starts = tuple(tuple(s) for s in instance.starts)
    if any(starts[r] not in dists[r] for r in range(n)):
        return None
    if n == 0:
        return 0, ()
    nbrs = {c: _neighbours(ws, c) for c in map(tuple, ws.free_cells())}

    def h(pos, parked):
        return sum(0 if parked[r] else dists[r][pos[r]] for r in range(n))

    def successors(pos, parked):
        # per robot: list of (next cell, parks) choices; generated with pruning
        choices = []
        for r in range(n):
            if parked[r]:
                choices.append(((pos[r], True),))
                continue
            opts = [(c, False) for c in nbrs[pos[r]] if c in dists[r]]
            if pos[r] == goals[r]:
                opts.append((pos[r], True))
            choices.append(opts)

        out = []

        def rec(r, new_pos, new_park, taken):
            if r == n:
                out.append((tuple(new_pos), tuple(new_park)))
                return
            for c, park in choices[r]:
                if c in taken:
                    continue
                # swap check against already placed robots
                swap = False
                for q in range(r):
                    if new_pos[q] == pos[r] and pos[q] == c and c != pos[r]:
                        swap = True
                        break
                if swap:
                    continue
                new_pos.append(c)
                new_park.append(park)
                taken.add(c)
                rec(r + 1, new_pos, new_park, taken)
                taken.discard(c)
                new_pos.pop()
                new_park.pop()

        rec(0, [], [], set())
        return out

    start = (starts, (False,) * n)
    g_best = {start: 0}
    parent = {start: None}
    tie = itertools.count()
    heap = [(h(*start), 0, next(tie), start)]
    while heap:
        f, g, _, state = heapq.heappop(heap)
        if g > g_best.get(state, float("inf")):
            continue
        if cap is not None and f > cap:
            return None
        pos, parked = state
        if all(parked):
            return g, _unwind(parent, state, n)
        for nxt in successors(pos, parked):
            step = sum(1 for r in range(n) if not nxt[1][r])
            ng = g + step
            if ng < g_best.get(nxt, float("inf")):
                g_best[nxt] = ng
                parent[nxt] = state
                heapq.heappush(heap, (ng + h(*nxt), ng, next(tie), nxt))
    return None


def _unwind(parent, state, n):
    states = []
    while state is not None:
        states.append(state)
        state = parent[state]
    states.reverse()
    paths = [[] for _ in range(n)]
    for pos, parked in states:
        for r in range(n):
            paths[r].append(pos[r])
    # trim the resting tail of each robot
    out = []
    for p in paths:
        while len(p) > 1 and p[-2] == p[-1]:
            p.pop()
        out.append(tuple(p))
    return tuple(out)


@dataclass
class OracleResult:
    cost: int
    M: tuple
    paths: tuple
    optimal_matchings: int


def default_cap(instance: Instance, best_matching_cost: int) -> int:
    ws = instance.workspace
    return best_matching_cost + 2 * instance.num_robots * max(ws.width, ws.height)


def brute_optimal(instance: Instance, cost_cap=None) -> OracleResult | None:
    """Minimum collision-free sum of costs over all matchings.

    Matchings are tried cheapest first; the search stops once the next
    matching's unconstrained cost exceeds the best found. Returns ``None``
    when nothing is feasible within the cap.
    """
    ws = instance.workspace
    n = instance.num_robots
    if n > MAX_JOINT_ROBOTS or ws.width * ws.height > MAX_JOINT_CELLS:
        raise OracleSizeError(
            f"oracle limited to {MAX_JOINT_ROBOTS} robots on {MAX_JOINT_CELLS} cells"
        )
    matchings = enumerate_matchings(instance)
    if not matchings:
        return None
    if cost_cap is None:
        cost_cap = default_cap(instance, matchings[0][1])
    fields = _goal_fields(instance)
    best = None
    count = 0
    for M, lb in matchings:
        bound = cost_cap if best is None else min(cost_cap, best.cost)
        if lb > bound:
            break
        res = joint_optimal(instance, M, cap=bound, fields=fields)
        if res is None:
            continue
        cost, paths = res
        if best is None or cost < best.cost:
            best = OracleResult(cost, M, paths, 1)
        elif cost == best.cost:
            best.optimal_matchings += 1
    return best


def partition_optimal(instance: Instance, omit=(), include=(), cost_cap=None) -> int | None:
    """Minimum collision-free cost over matchings that use every pair in
    ``include`` and none in ``omit``; ``None`` if the partition is empty or
    nothing fits under the cap."""
    ws = instance.workspace
    if instance.num_robots > MAX_JOINT_ROBOTS or ws.width * ws.height > MAX_JOINT_CELLS:
        raise OracleSizeError(
            f"oracle limited to {MAX_JOINT_ROBOTS} robots on {MAX_JOINT_CELLS} cells"
        )
    omit, include = set(omit), set(include)
    matchings = [
        (M, c) for M, c in enumerate_matchings(instance)
        if include <= set(enumerate(M)) and not omit & set(enumerate(M))
    ]
    if not matchings:
        return None
    if cost_cap is None:
        cost_cap = default_cap(instance, matchings[0][1])
    fields = _goal_fields(instance)
    best = None
    for M, lb in matchings:
        bound = cost_cap if best is None else min(cost_cap, best)
        if lb > bound:
            break
        res = joint_optimal(instance, M, cap=bound, fields=fields)
        if res is not None and (best is None or res[0] < best):
            best = res[0]
    return best
