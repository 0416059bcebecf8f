"""Single-robot space-time A* under CBS constraints, plus the path memo.

A path is a tuple of cells indexed by timestep. After its last cell the
robot rests there forever, so a path's cost is its final-arrival time.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

from .grid import Cell, DistanceField, Instance, Workspace, true_distance_field

Path = tuple  # tuple[Cell, ...]


class VertexConstraint(NamedTuple):
    """Forbids occupying ``cell`` at timestep ``t``."""

    t: int
    cell: Cell


class EdgeConstraint(NamedTuple):
    """Forbids moving ``frm -> to`` between ``t`` and ``t + 1``."""

    t: int
    frm: Cell
    to: Cell


Constraint = Union[VertexConstraint, EdgeConstraint]


def _sort_key(c: Constraint):
    if isinstance(c, VertexConstraint):
        return (c.t, 0, c.cell, c.cell)
    return (c.t, 1, c.frm, c.to)


class ConstraintSet:
    """Canonical, hashable set of constraints for one robot."""

    __slots__ = ("items", "_hash", "__dict__")

    def __init__(self, constraints=()):
        items = set()
        for c in constraints:
            if c.t < 0:
                raise ValueError(f"negative timestep in {c}")
            if isinstance(c, EdgeConstraint) and c.frm == c.to:
                raise ValueError("a forbidden wait must be a vertex constraint")
            items.add(c)
        self.items = tuple(sorted(items, key=_sort_key))
        self._hash = hash(self.items)

    def add(self, c: Constraint) -> ConstraintSet:
        if c in self.vertex or c in self.edge:
            return self
        return ConstraintSet(self.items + (c,))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, ConstraintSet) and self.items == other.items

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __repr__(self):
        return f"ConstraintSet({list(self.items)!r})"

    @cached_property
    def vertex(self) -> frozenset:
        return frozenset(c for c in self.items if isinstance(c, VertexConstraint))

    @cached_property
    def edge(self) -> frozenset:
        return frozenset(c for c in self.items if isinstance(c, EdgeConstraint))

    @cached_property
    def max_time(self) -> int:
        return max((c.t for c in self.items), default=-1)

    def last_time_at(self, cell: Cell) -> int:
        """Latest vertex-constraint time on ``cell``, or -1."""
        return max((c.t for c in self.vertex if c.cell == cell), default=-1)


EMPTY = ConstraintSet()


def path_cost(path) -> int:
    """Final-arrival time: waits at the last cell after arriving are free."""
    if not path:
        raise ValueError("empty path")
    last = path[-1]
    t = len(path) - 1
    while t > 0 and path[t - 1] == last:
        t -= 1
    return t


def violates(path, cset: ConstraintSet) -> list[Constraint]:
    """Constraints in ``cset`` broken by ``path`` (resting at the end)."""
    def at(t):
        return path[t] if t < len(path) else path[-1]

    broken = []
    for c in cset:
        if isinstance(c, VertexConstraint):
            if at(c.t) == c.cell:
                broken.append(c)
        elif at(c.t) == c.frm and at(c.t + 1) == c.to:
            broken.append(c)
    return broken


def astar(
    ws: Workspace,
    start: Cell,
    goal: Cell,
    cset: ConstraintSet = EMPTY,
    hfield: DistanceField | None = None,
):
    """Minimum final-arrival path from ``start`` to ``goal`` obeying ``cset``.

    Returns ``None`` when no such path exists. Beyond the latest constraint
    time nothing is time dependent any more, so those states are keyed by
    cell alone; this bounds the search. The heuristic is ``hfield`` when
    given (exact distances, worth it for repeated constrained searches) and
    Manhattan distance otherwise.
    """
    if hfield is not None:
        dist = hfield.dist
        if start not in dist:
            return None
    else:
        comp = ws.components
        if comp.get(start) is None or comp.get(start) != comp.get(goal):
            return None
        dist = None
    gx, gy = goal
    vertex = {(c.cell, c.t) for c in cset.vertex}
    edge = {(c.frm, c.to, c.t) for c in cset.edge}
    if (start, 0) in vertex:
        return None
    tmax = cset.max_time
    settle = tmax + 1
    goal_after = cset.last_time_at(goal)
    horizon = ws.size + settle
    adj = ws.adjacency
    width = ws.width

    # entries: (f, -g, cell index, seq, cell, t)
    seq = 0
    h0 = dist[start] if dist is not None else abs(start[0] - gx) + abs(start[1] - gy)
    open_heap = [(h0, 0, start[1] * width + start[0], seq, start, 0)]
    parent = {(start, 0): None}
    closed = set()
    while open_heap:
        _, _, _, _, cell, t = heapq.heappop(open_heap)
        key = (cell, t if t <= settle else settle)
        if key in closed:
            continue
        closed.add(key)
        if cell == goal and t > goal_after:
            out = []
            state = (cell, t)
            while state is not None:
                out.append(state[0])
                state = parent[state]
            out.reverse()
            return tuple(out)
        nt = t + 1
        if nt > horizon:
            continue
        for nxt in adj[cell] + (cell,):
            if dist is None:
                h = abs(nxt[0] - gx) + abs(nxt[1] - gy)
            else:
                h = dist.get(nxt)
                if h is None:
                    continue
            if nt <= tmax and (nxt, nt) in vertex:
                continue
            if t <= tmax and (cell, nxt, t) in edge:
                continue
            nkey = (nxt, nt if nt <= settle else settle)
            if nkey in closed:
                continue
            state = (nxt, nt)
            # g equals t, so the first parent recorded for a state is optimal
            if state in parent:
                continue
            parent[state] = (cell, t)
            seq += 1
            heapq.heappush(
                open_heap, (nt + h, -nt, nxt[1] * width + nxt[0], seq, nxt, nt)
            )
    return None


class PathCache:
    """Memo of constrained paths keyed by (robot, goal, constraint set)."""

    def __init__(self):
        self._store: dict = {}
        self.hits = 0
        self.misses = 0

    def get(self, key):
        path = self._store.get(key)
        if path is None:
            self.misses += 1
        else:
            self.hits += 1
        return path

    def put(self, key, path) -> None:
        if key in self._store:
            raise KeyError(f"cache entry {key[:2]} already set")
        self._store[key] = path

    def __contains__(self, key):
        return key in self._store

    def __len__(self):
        return len(self._store)

    def items(self):
        return self._store.items()


_INFEASIBLE = ()  # cached marker for keys with no path


@dataclass
class PathPlanner:
    """Low-level planner bound to one instance and one solve session."""

    instance: Instance
    memo: bool = True
    verify_hits: bool = False

    def __post_init__(self):
        self.cache = PathCache()
        self.astar_calls = 0
        self.hit_mismatches = 0
        self._fields: dict[int, DistanceField] = {}

    def field(self, g: int) -> DistanceField:
        f = self._fields.get(g)
        if f is None:
            f = true_distance_field(self.instance.workspace, self.instance.goals[g])
            self._fields[g] = f
        return f

    def plan(self, r: int, g: int, cset: ConstraintSet = EMPTY):
        self.astar_calls += 1
        inst = self.instance
        # an exact field costs a sweep of the whole workspace; only constrained
        # replans, which revisit the same goal many times, pay for it
        hfield = self.field(g) if len(cset) else None
        return astar(inst.workspace, inst.starts[r], inst.goals[g], cset, hfield)

    def get_constrained_path(self, r: int, g: int, cset: ConstraintSet = EMPTY):
        """Constrained path for robot ``r`` to goal ``g``; ``None`` if infeasible."""
        if not self.memo:
            return self.plan(r, g, cset)
        key = (r, g, cset)
        path = self.cache.get(key)
        if path is None:
            path = self.plan(r, g, cset)
            self.cache.put(key, _INFEASIBLE if path is None else path)
            return path
        if self.verify_hits:
            fresh = self.plan(r, g, cset)
            if (fresh is None) != (path is _INFEASIBLE) or (
                fresh is not None and path_cost(fresh) != path_cost(path)
            ):
                self.hit_mismatches += 1
        return None if path is _INFEASIBLE else path
