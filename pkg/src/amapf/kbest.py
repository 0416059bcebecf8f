"""On-demand next-best assignments with conflict-guided postponement.

Murty-style partitioning: the space of matchings allowed by ``(O, I)`` minus
its best matching splits into disjoint partitions, one per robot in some
order. The order puts robots that took part in cost-raising conflicts first
so that learned conflicting edge sets enter include sets early; partitions
whose include set contains such a set are postponed with a lower bound and
only solved once nothing cheaper is left.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .assignment import CostMatrix, compute_assignment


@dataclass
class AsgnNode:
    O: frozenset
    I: frozenset
    M: tuple
    paths: tuple
    cost: int


@dataclass(frozen=True)
class ConflictRecordEntry:
    acc_conf: frozenset  # (robot, goal) edges
    cost_inc: int

    def __post_init__(self):
        if self.cost_inc <= 0:
            raise ValueError("cost increment must be positive")
        if not self.acc_conf:
            raise ValueError("empty conflicting edge set")


@dataclass
class PostponedEntry:
    lb: int
    O: frozenset
    I: frozenset
    base_cost: int = 0
    revoked: bool = False
    result: AsgnNode | None = None


def add_record(conflict_rec: list, entry: ConflictRecordEntry) -> bool:
    """Insert ``entry`` unless an equal or dominating entry exists.

    Entries with the same edge set keep only the largest increment.
    Returns whether the record changed.
    """
    for i, old in enumerate(conflict_rec):
        if old.acc_conf == entry.acc_conf:
            if entry.cost_inc > old.cost_inc:
                conflict_rec[i] = entry
                return True
            return False
    conflict_rec.append(entry)
    return True


def sort_record(conflict_rec) -> list:
    return sorted(conflict_rec, key=lambda e: -e.cost_inc)


def custom_order(M, conflict_rec, keep_all: bool = False) -> list[int]:
    """Robot order for partitioning around matching ``M``.

    ``conflict_rec`` must already be sorted by decreasing increment. Robots
    in conflicting edge sets come first, in order of appearance; the rest
    follow by index. The highest-index non-conflicting robot is left out
    (or the last conflicting robot, if every robot conflicts), since with
    as many goals as robots its partition is empty. ``keep_all`` keeps every
    robot, which is required when goals outnumber robots.
    """
    robots = list(range(len(M)))
    ordered: list[int] = []
    placed = set()
    for entry in conflict_rec:
        for r, _ in sorted(entry.acc_conf):
            if r not in placed and 0 <= r < len(M):
                placed.add(r)
                ordered.append(r)
    rest = [r for r in robots if r not in placed]
    if keep_all:
        return ordered + rest
    if rest:
        return ordered + rest[:-1]
    return ordered[:-1]


def lower_bound(theta_star_cost, include, conflict_rec):
    """``theta_star_cost`` plus the increment of the first record entry whose
    edge set lies inside ``include`` (the largest, as the record is sorted)."""
    for entry in conflict_rec:
        if entry.acc_conf <= include:
            return theta_star_cost + entry.cost_inc
    return theta_star_cost


@dataclass
class GeneratorStats:
    computed: int = 0
    postponed: int = 0
    revoked: int = 0
    infeasible: int = 0


class AssignmentGenerator:
    """Ranked matchings produced one at a time, sharing one cost matrix."""

    def __init__(self, C: CostMatrix, planner, postpone: bool = True):
        self.C = C
        self.planner = planner
        self.postpone = postpone
        self.open: list = []  # (cost, M, seq, node)
        self.post: list = []  # (lb, seq, entry)
        self.postponed_log: list[PostponedEntry] = []
        self.stats = GeneratorStats()
        self._seq = itertools.count()
        self._started = False

    @property
    def n_robots(self) -> int:
        return self.C.shape[0]

    def _solve(self, O, I) -> AsgnNode | None:
        self.stats.computed += 1
        res = compute_assignment(self.C, O, I, self.planner)
        if res is None:
            self.stats.infeasible += 1
            return None
        node = AsgnNode(frozenset(O), frozenset(I), res.M, res.paths, res.cost)
        heapq.heappush(self.open, (node.cost, node.M, next(self._seq), node))
        return node

    def first(self) -> AsgnNode | None:
        if self._started:
            raise RuntimeError("first assignment already computed")
        self._started = True
        return self._solve(frozenset(), frozenset())

    def peek(self) -> AsgnNode | None:
        return self.open[0][3] if self.open else None

    def next(self, conflict_rec=()) -> AsgnNode | None:
        """Partition around the current best matching and return the new best.

        The returned node stays queued; the following call partitions it.
        With an empty queue, postponed partitions are drained before
        reporting exhaustion.
        """
        if not self._started:
            raise RuntimeError("call first() before next()")
        record = sort_record(conflict_rec) if self.postpone else []
        if self.open:
            _, _, _, best = heapq.heappop(self.open)
            self._partition(best, record)

        inf = float("inf")
        while True:
            avail = self.open[0][0] if self.open else inf
            pending = self.post[0][0] if self.post else inf
            if not avail > pending:
                break
            _, _, entry = heapq.heappop(self.post)
            entry.revoked = True
            self.stats.revoked += 1
            entry.result = self._solve(entry.O, entry.I)
        return self.peek()

    def _partition(self, best: AsgnNode, record) -> None:
        bound = {r for r, _ in best.I}
        # leave out the last *free* robot: robots bound by I get no partition
        order = [r for r in custom_order(best.M, record, keep_all=True) if r not in bound]
        if self.C.shape[1] == self.C.shape[0]:
            order = order[:-1]
        prefix = set(best.I)
        for r in order:
            O = best.O | {(r, best.M[r])}
            I = frozenset(prefix)
            prefix.add((r, best.M[r]))
            if self.postpone and record:
                lb = lower_bound(best.cost, I, record)
                if lb > best.cost:
                    entry = PostponedEntry(lb, O, I, base_cost=best.cost)
                    self.postponed_log.append(entry)
                    self.stats.postponed += 1
                    heapq.heappush(self.post, (lb, next(self._seq), entry))
                    continue
            self._solve(O, I)
