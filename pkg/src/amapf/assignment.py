"""Minimum-cost robot-goal matching over a lazily refined cost matrix.

Entries start as Manhattan lower bounds and are upgraded to actual
unconstrained path costs only when a candidate matching uses them. Because
heuristic entries never exceed the actual cost, a matching that is optimal
on the mixed table and uses only actual entries is optimal on the fully
actual table: every other matching costs at least its mixed-table value.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import Instance, manhattan
from .pathfinding import path_cost

HEURISTIC, ACTUAL, FORBIDDEN = 0, 1, 2
_KIND_CHAR = {HEURISTIC: "h", ACTUAL: "a", FORBIDDEN: "x"}


def hungarian(values):
    """Minimum-cost assignment of every row to a distinct column.

    ``values`` is an ``R x G`` table with ``R <= G``; ``inf`` marks a
    forbidden pair. Returns the column chosen for each row, or ``None`` when
    every complete assignment needs a forbidden pair. Among optimal
    assignments the lexicographically smallest column vector is returned.
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost table must be two-dimensional")
    n, m = a.shape
    if n == 0:
        return ()
    if n > m:
        raise ValueError(f"{n} rows cannot be matched into {m} columns")
    if n < m:
        # zero-cost dummy rows absorb the unused columns
        a = np.vstack([a, np.zeros((m - n, m))])
    size = m

    # shortest augmenting path (Jonker-Volgenant style), 1-based columns
    u = np.zeros(size + 1)
    v = np.zeros(size + 1)
    p = np.zeros(size + 1, dtype=int)  # p[j]: row (1-based) matched to column j
    way = np.zeros(size + 1, dtype=int)
    for i in range(1, size + 1):
        p[0] = i
        j0 = 0
        minv = np.full(size + 1, np.inf)
        used = np.zeros(size + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            if not np.isfinite(delta):
                return None
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col_of = np.zeros(size, dtype=int)
    for j in range(1, size + 1):
        col_of[p[j] - 1] = j - 1
    if not np.all(np.isfinite(a[np.arange(size), col_of])):
        return None
    _lex_refine(a, u[1:], v[1:], col_of, n)
    return tuple(int(c) for c in col_of[:n])


def _lex_refine(a, u, v, col_of, n_real):
    """Rotate ``col_of`` to the lexicographically least optimal matching.

    With optimal duals ``u, v`` a perfect matching is optimal exactly when
    all of its edges are tight, so improvements are alternating cycles in
    the tight-edge graph that leave earlier rows untouched.
    """
    size = len(col_of)
    tight = np.isclose(a - u[:, None] - v[None, :], 0.0, atol=1e-9) & np.isfinite(a)
    row_of = np.empty(size, dtype=int)
    row_of[col_of] = np.arange(size)
    for r in range(n_real):
        target = col_of[r]
        cands = [g for g in np.flatnonzero(tight[r]) if g < target]
        if not cands:
            continue
        # rows (other than r and earlier rows) that can reach `target` by
        # repeatedly taking a tight column held by the next row
        nxt = {}
        seen = {}
        queue = deque()
        for q in np.flatnonzero(tight[:, target]):
            if q > r:
                seen[q] = True
                nxt[q] = None
                queue.append(q)
        while queue:
            q = queue.popleft()
            col = col_of[q]
            for w in np.flatnonzero(tight[:, col]):
                if w > r and w not in seen:
                    seen[w] = True
                    nxt[w] = q
                    queue.append(w)
        for g in cands:
            holder = row_of[g]
            if holder not in seen:
                continue
            # holder takes the column of nxt[holder], ..., last takes target
            chain = [holder]
            while nxt[chain[-1]] is not None:
                chain.append(nxt[chain[-1]])
            new_cols = [col_of[w] for w in chain[1:]] + [target]
            for w, c in zip(chain, new_cols):
                col_of[w] = c
                row_of[c] = w
            col_of[r] = g
            row_of[g] = r
            break


@dataclass
class AssignmentResult:
    M: tuple  # goal index per robot
    paths: tuple
    cost: int


class CostMatrix:
    """Robot-goal table mixing Manhattan bounds and actual path costs.

    The matrix is shared by every assignment computed in one solve, so an
    actual cost found once is never recomputed.
    """

    def __init__(self, values, kinds=None):
        self.values = np.array(values, dtype=float)
        if kinds is None:
            kinds = np.full(self.values.shape, HEURISTIC, dtype=np.int8)
        self.kinds = np.array(kinds, dtype=np.int8)
        self.paths: dict = {}
        self.upgrades = 0

    @classmethod
    def manhattan(cls, inst: Instance) -> CostMatrix:
        table = [[manhattan(s, g) for g in inst.goals] for s in inst.starts]
        return cls(np.array(table, dtype=float).reshape(inst.num_robots, inst.num_goals))

    @property
    def shape(self):
        return self.values.shape

    def kind(self, r, g) -> int:
        return int(self.kinds[r, g])

    @property
    def actual_count(self) -> int:
        return int(np.count_nonzero(self.kinds != HEURISTIC))

    def resolve(self, r: int, g: int, planner) -> None:
        """Replace a heuristic entry by its actual unconstrained cost."""
        if self.kinds[r, g] != HEURISTIC:
            return
        path = planner.get_constrained_path(r, g)
        self.upgrades += 1
        if path is None:
            self.values[r, g] = np.inf
            self.kinds[r, g] = FORBIDDEN
            return
        cost = path_cost(path)
        if cost < self.values[r, g]:
            raise AssertionError(f"heuristic for ({r}, {g}) exceeds actual cost {cost}")
        self.values[r, g] = cost
        self.kinds[r, g] = ACTUAL
        self.paths[r, g] = path

    def fill_actual(self, planner) -> None:
        rows, cols = self.shape
        for r in range(rows):
            for g in range(cols):
                self.resolve(r, g, planner)

    def dump(self) -> str:
        """Text grid of ``<kind><value>`` entries (h: heuristic, a: actual, x: forbidden)."""
        lines = []
        rows, cols = self.shape
        for r in range(rows):
            cells = []
            for g in range(cols):
                k = int(self.kinds[r, g])
                val = "inf" if k == FORBIDDEN else str(int(self.values[r, g]))
                cells.append(f"{_KIND_CHAR[k]}{val:>4}")
            lines.append(" ".join(cells))
        return "\n".join(lines)


def compute_assignment(C: CostMatrix, omit, include, planner):
    """Optimal matching containing ``include`` and avoiding ``omit``.

    Upgrades heuristic entries of ``C`` in place until the optimum on the
    mixed table uses only actual entries. Returns an ``AssignmentResult`` or
    ``None`` when no permitted matching exists.
    """
    n_r, n_g = C.shape
    inc_rows = {r for r, _ in include}
    inc_cols = {g for _, g in include}
    if len(inc_rows) != len(include) or len(inc_cols) != len(include):
        raise ValueError("include set is not a partial matching")
    if set(omit) & set(include):
        raise ValueError("include and omit sets overlap")
    for r, g in include:
        C.resolve(r, g, planner)
        if C.kinds[r, g] == FORBIDDEN:
            return None
    rows = [r for r in range(n_r) if r not in inc_rows]
    cols = [g for g in range(n_g) if g not in inc_cols]
    row_pos = {r: i for i, r in enumerate(rows)}
    col_pos = {g: j for j, g in enumerate(cols)}
    omit_cells = [
        (row_pos[r], col_pos[g]) for r, g in omit if r in row_pos and g in col_pos
    ]

    M = dict(include)
    if rows:
        while True:
            sub = C.values[np.ix_(rows, cols)]
            for i, j in omit_cells:
                sub[i, j] = np.inf
            match = hungarian(sub)
            if match is None:
                return None
            pending = [
                (rows[i], cols[j])
                for i, j in enumerate(match)
                if C.kinds[rows[i], cols[j]] == HEURISTIC
            ]
            if not pending:
                break
            for r, g in pending:
                C.resolve(r, g, planner)
        for i, j in enumerate(match):
            M[rows[i]] = cols[j]

    goals = tuple(M[r] for r in range(n_r))
    # actual entries equal their path costs; bare tables carry no paths
    paths = tuple(C.paths.get((r, g)) for r, g in enumerate(goals))
    return AssignmentResult(goals, paths, int(sum(C.values[r, g] for r, g in enumerate(goals))))


def actual_table(values) -> CostMatrix:
    """Cost matrix whose entries are all final (no planner needed)."""
    a = np.array(values, dtype=float)
    kinds = np.where(np.isinf(a), FORBIDDEN, ACTUAL)
    return CostMatrix(a, kinds)
