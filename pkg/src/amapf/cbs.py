"""Conflict-based search over a forest of assignment trees.

Each root holds one robot-goal matching; its tree resolves collisions by
branching on constraints. New roots are requested from the assignment
generator only when the best open node would exceed the largest root cost
seen so far, and cost-raising conflicts are recorded so the generator can
postpone matchings that repeat them.

``Variant`` toggles the three enhancements: ``h`` lazy cost matrix, ``m``
path memoization, ``p`` conflict-guided root creation with postponement.
With ``p`` off the search follows CBS-TA: the next root is created as soon
as the current one is expanded.
"""
from __future__ import annotations

import heapq
import itertools
import re
import time
from dataclasses import dataclass, field

from .assignment import CostMatrix
from .grid import Instance
from .kbest import AssignmentGenerator, ConflictRecordEntry, add_record
from .pathfinding import (
    EMPTY,
    EdgeConstraint,
    PathPlanner,
    VertexConstraint,
    path_cost,
)
from .validation import validate_solution

VARIANT_RE = re.compile(r"^h([01])m([01])p([01])$")
ALL_VARIANTS = tuple(f"h{h}m{m}p{p}" for h in "01" for m in "01" for p in "01")


@dataclass(frozen=True)
class Variant:
    heuristic: bool = True
    memo: bool = True
    postpone: bool = True

    @classmethod
    def parse(cls, text) -> Variant:
        if isinstance(text, Variant):
            return text
        m = VARIANT_RE.match(text)
        if not m:
            raise ValueError(f"variant must look like h1m1p1, got {text!r}")
        return cls(*(c == "1" for c in m.groups()))

    def __str__(self):
        return f"h{int(self.heuristic)}m{int(self.memo)}p{int(self.postpone)}"


@dataclass(eq=False)
class SearchNode:
    root: bool
    root_id: int
    root_cost: int
    parent: SearchNode | None
    constraints: tuple  # ConstraintSet per robot
    M: tuple
    paths: tuple
    cost: int
    conf_reg: bool = False
    seq: int = 0


@dataclass(frozen=True)
class Conflict:
    robot1: int
    robot2: int
    kind: str  # "vertex" or "edge"
    t: int
    cell: tuple  # vertex cell, or robot1's source cell for edges
    to: tuple | None = None  # robot1's target cell for edges


def _at(path, t):
    return path[t] if t < len(path) else path[-1]


def get_first_conflict(paths) -> Conflict | None:
    """Earliest conflict under rest-at-goal semantics.

    Ties at one timestep go to the smallest robot pair, vertex before edge.
    An edge conflict at ``t`` is a swap between ``t`` and ``t + 1``.
    """
    if len(paths) < 2:
        return None
    horizon = max(len(p) for p in paths)
    for t in range(horizon):
        best = None
        seen: dict = {}
        for r, p in enumerate(paths):
            c = _at(p, t)
            other = seen.get(c)
            if other is None:
                seen[c] = r
            else:
                key = (other, r, 0)
                if best is None or key < best[0]:
                    best = (key, Conflict(other, r, "vertex", t, c))
        if t + 1 < horizon:
            moves: dict = {}
            for r, p in enumerate(paths):
                a, b = _at(p, t), _at(p, t + 1)
                if a != b:
                    moves[(a, b)] = r
            for (a, b), r in moves.items():
                q = moves.get((b, a))
                if q is not None and q > r:
                    key = (r, q, 1)
                    if best is None or key < best[0]:
                        best = (key, Conflict(r, q, "edge", t, a, b))
        if best is not None:
            return best[1]
    return None


def create_constraints(conflict: Conflict):
    """Two branches ``(robot, constraint)``, one per conflicting robot."""
    if conflict.kind == "vertex":
        c = VertexConstraint(conflict.t, conflict.cell)
        return ((conflict.robot1, c), (conflict.robot2, c))
    return (
        (conflict.robot1, EdgeConstraint(conflict.t, conflict.cell, conflict.to)),
        (conflict.robot2, EdgeConstraint(conflict.t, conflict.to, conflict.cell)),
    )


class OpenList:
    """Best-first queue keyed by (cost, conf_reg, insertion order).

    Setting ``conf_reg`` on a queued node re-keys it; the stale heap entry
    is skipped lazily.
    """

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self._size = 0

    def push(self, node: SearchNode) -> None:
        node.seq = next(self._seq)
        heapq.heappush(self._heap, (node.cost, node.conf_reg, node.seq, node))
        self._size += 1

    def _clean(self):
        heap = self._heap
        while heap and heap[0][1] != heap[0][3].conf_reg:
            heapq.heappop(heap)

    def pop(self) -> SearchNode:
        self._clean()
        node = heapq.heappop(self._heap)[3]
        self._size -= 1
        return node

    def peek(self) -> SearchNode:
        self._clean()
        return self._heap[0][3]

    def mark_registered(self, node: SearchNode) -> None:
        if not node.conf_reg:
            node.conf_reg = True
            heapq.heappush(self._heap, (node.cost, True, node.seq, node))

    def __len__(self):
        return self._size

    def __bool__(self):
        return self._size > 0


@dataclass
class Solution:
    status: str  # "solved", "infeasible" or "timeout"
    variant: str
    M: tuple = ()
    paths: tuple = ()
    cost: int | None = None
    stats: dict = field(default_factory=dict)
    # (lb, omit, include, revoked) per postponed partition; not serialized
    postponed: tuple = ()

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "assignment": [{"robot": r, "goal": g} for r, g in enumerate(self.M)],
            "paths": [[[c[0], c[1]] for c in p] for p in self.paths],
            "stats": dict(self.stats),
            "variant": self.variant,
            "status": self.status,
        }


STAT_FIELDS = (
    "nodes_expanded",
    "nodes_generated",
    "roots_created",
    "conflicts_found",
    "conflict_records",
    "assignments_computed",
    "assignments_postponed",
    "assignments_revoked",
    "actual_entries",
    "astar_calls",
    "cache_hits",
    "wall_time",
)


class Timeout(Exception):
    pass


class Solver:
    """One solve session: open list, forest bookkeeping, generator, memo."""

    def __init__(self, instance: Instance, variant="h1m1p1", timeout=None, verify_memo=False):
        self.instance = instance
        self.variant = Variant.parse(variant)
        self.timeout = timeout
        self.planner = PathPlanner(instance, memo=self.variant.memo, verify_hits=verify_memo)
        self.open = OpenList()
        self.acc_conf: dict[int, set] = {}
        self.conflict_rec: list[ConflictRecordEntry] = []
        self.root_gen = 0
        self.latest_root_cost = None
        self.root_costs: list[int] = []
        self.root_matchings: list[tuple] = []
        self.generator: AssignmentGenerator | None = None
        self.C: CostMatrix | None = None
        self.nodes_expanded = 0
        self.nodes_generated = 0
        self.conflicts_found = 0
        self._deadline = None
        self._t0 = None

    # -- forest bookkeeping -------------------------------------------------

    def create_root(self, theta) -> int:
        self.root_gen += 1
        n = self.instance.num_robots
        node = SearchNode(
            root=True,
            root_id=self.root_gen,
            root_cost=theta.cost,
            parent=None,
            constraints=(EMPTY,) * n,
            M=theta.M,
            paths=theta.paths,
            cost=theta.cost,
        )
        self.acc_conf[node.root_id] = set()
        self.open.push(node)
        self.nodes_generated += 1
        self.root_costs.append(theta.cost)
        self.root_matchings.append(theta.M)
        # the largest root cost, which postponement can make differ from the newest
        if self.latest_root_cost is None or theta.cost > self.latest_root_cost:
            self.latest_root_cost = theta.cost
        return node.cost

    def create_child_nodes(self, parent: SearchNode, branches) -> list[SearchNode]:
        children = []
        for r, constraint in branches:
            cset = parent.constraints[r].add(constraint)
            g = parent.M[r]
            path = self.planner.get_constrained_path(r, g, cset)
            if path is None:
                continue
            constraints = parent.constraints[:r] + (cset,) + parent.constraints[r + 1:]
            paths = parent.paths[:r] + (path,) + parent.paths[r + 1:]
            cost = parent.cost - path_cost(parent.paths[r]) + path_cost(path)
            child = SearchNode(
                root=False,
                root_id=parent.root_id,
                root_cost=parent.root_cost,
                parent=parent,
                constraints=constraints,
                M=parent.M,
                paths=paths,
                cost=cost,
            )
            self.open.push(child)
            self.nodes_generated += 1
            children.append(child)
        return children

    def register_conflict(self, node: SearchNode) -> bool:
        """Learn the tree's conflicting edges if ``node`` raised the cost."""
        if node.root or node.conf_reg or not node.cost > node.parent.cost:
            return False
        entry = ConflictRecordEntry(
            frozenset(self.acc_conf[node.root_id]), node.cost - node.root_cost
        )
        add_record(self.conflict_rec, entry)
        self.open.mark_registered(node)
        return True

    def _next_root(self) -> bool:
        record = self.conflict_rec if self.variant.postpone else ()
        theta = self.generator.next(record)
        if theta is None:
            return False
        self.create_root(theta)
        return True

    def _check_time(self):
        if self._deadline is not None and time.perf_counter() > self._deadline:
            raise Timeout

    # -- main loop ------------------------------------------------------------

    def solve(self) -> Solution:
        self._t0 = time.perf_counter()
        if self.timeout is not None:
            self._deadline = self._t0 + self.timeout
        try:
            node = self._search()
        except Timeout:
            return self._finish("timeout")
        if node is None:
            return self._finish("infeasible")
        errors = validate_solution(self.instance, node.M, node.paths, node.cost)
        if errors:
            raise AssertionError("solver produced an invalid solution: " + "; ".join(errors))
        return self._finish("solved", node)

    def _search(self) -> SearchNode | None:
        inst = self.instance
        self.C = CostMatrix.manhattan(inst)
        if not self.variant.heuristic:
            self.C.fill_actual(self.planner)
        self.generator = AssignmentGenerator(self.C, self.planner, postpone=self.variant.postpone)
        theta = self.generator.first()
        if theta is None:
            return None
        self.create_root(theta)

        postpone = self.variant.postpone
        while self.open:
            self._check_time()
            best = self.open.pop()
            self.nodes_expanded += 1
            conflict = get_first_conflict(best.paths)
            if conflict is None:
                return best
            self.conflicts_found += 1
            if postpone:
                acc = self.acc_conf[best.root_id]
                acc.add((conflict.robot1, best.M[conflict.robot1]))
                acc.add((conflict.robot2, best.M[conflict.robot2]))
            elif best.root:
                self._next_root()
            self.create_child_nodes(best, create_constraints(conflict))

            if not self.open:
                # every branch of this tree died; only a new root can continue
                self._next_root()
                continue
            if not postpone:
                continue
            nxt = self.open.peek()
            if nxt.root:
                continue
            self.register_conflict(nxt)
            if nxt.cost > self.latest_root_cost:
                self._next_root()
        return None

    def _finish(self, status, node: SearchNode | None = None) -> Solution:
        gen = self.generator
        stats = {
            "nodes_expanded": self.nodes_expanded,
            "nodes_generated": self.nodes_generated,
            "roots_created": self.root_gen,
            "conflicts_found": self.conflicts_found,
            "conflict_records": len(self.conflict_rec),
            "assignments_computed": gen.stats.computed if gen else 0,
            "assignments_postponed": gen.stats.postponed if gen else 0,
            "assignments_revoked": gen.stats.revoked if gen else 0,
            "actual_entries": self.C.actual_count if self.C is not None else 0,
            "astar_calls": self.planner.astar_calls,
            "cache_hits": self.planner.cache.hits,
            "wall_time": time.perf_counter() - self._t0,
        }
        postponed = tuple(
            (e.lb, e.O, e.I, e.revoked) for e in (gen.postponed_log if gen else ())
        )
        if node is None:
            return Solution(status, str(self.variant), stats=stats, postponed=postponed)
        return Solution(
            status, str(self.variant), node.M, node.paths, node.cost, stats, postponed
        )


def solve(instance: Instance, variant="h1m1p1", timeout=None, **kwargs) -> Solution:
    """Optimal collision-free assignment and paths for ``instance``."""
    return Solver(instance, variant, timeout, **kwargs).solve()
