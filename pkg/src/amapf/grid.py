"""Grid workspaces, problem instances and distance fields.

Coordinates follow the MovingAI convention: ``x`` is the column, ``y`` the
row, origin at the top-left corner.
"""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

PASSABLE = frozenset(".G")
BLOCKED = frozenset("@OT")


class Cell(NamedTuple):
    x: int
    y: int


class ParseError(ValueError):
    """Malformed map, scenario or instance text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceError(ValueError):
    pass


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass(frozen=True)
class Workspace:
    width: int
    height: int
    obstacles: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InstanceError(f"bad dimensions {self.width}x{self.height}")
        obstacles = frozenset(Cell(*c) for c in self.obstacles)
        for c in obstacles:
            if not self.in_bounds(c):
                raise InstanceError(f"obstacle {tuple(c)} out of bounds")
        object.__setattr__(self, "obstacles", obstacles)

    def in_bounds(self, c) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_free(self, c) -> bool:
        return self.in_bounds(c) and c not in self.obstacles

    def index(self, c) -> int:
        return c[1] * self.width + c[0]

    @property
    def size(self) -> int:
        return self.width * self.height

    def free_cells(self) -> list[Cell]:
        return [
            Cell(x, y)
            for y in range(self.height)
            for x in range(self.width)
            if Cell(x, y) not in self.obstacles
        ]

    @cached_property
    def adjacency(self) -> dict[Cell, tuple[Cell, ...]]:
        """Free 4-neighbours of every free cell (waits not included)."""
        adj = {}
        for c in self.free_cells():
            x, y = c
            adj[c] = tuple(
                n
                for n in (Cell(x, y - 1), Cell(x, y + 1), Cell(x - 1, y), Cell(x + 1, y))
                if self.is_free(n)
            )
        return adj

    def neighbors(self, c: Cell) -> tuple[Cell, ...]:
        return self.adjacency[c]

    @cached_property
    def components(self) -> dict[Cell, int]:
        """Connected-component label of each free cell."""
        label: dict[Cell, int] = {}
        adj = self.adjacency
        k = -1
        for seed in adj:
            if seed in label:
                continue
            k += 1
            label[seed] = k
            queue = deque([seed])
            while queue:
                c = queue.popleft()
                for n in adj[c]:
                    if n not in label:
                        label[n] = k
                        queue.append(n)
        return label


@dataclass(frozen=True)
class Instance:
    workspace: Workspace
    starts: tuple
    goals: tuple

    def __post_init__(self):
        starts = tuple(Cell(*c) for c in self.starts)
        goals = tuple(Cell(*c) for c in self.goals)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "goals", goals)
        ws = self.workspace
        if len(starts) > len(goals):
            raise InstanceError(f"{len(starts)} robots but only {len(goals)} goals")
        for kind, cells in (("start", starts), ("goal", goals)):
            if len(set(cells)) != len(cells):
                raise InstanceError(f"duplicate {kind} cells")
            for c in cells:
                if not ws.in_bounds(c):
                    raise InstanceError(f"{kind} {tuple(c)} out of bounds")
                if c in ws.obstacles:
                    raise InstanceError(f"{kind} {tuple(c)} is on an obstacle")

    @property
    def num_robots(self) -> int:
        return len(self.starts)

    @property
    def num_goals(self) -> int:
        return len(self.goals)

    def to_dict(self) -> dict:
        ws = self.workspace
        return {
            "width": ws.width,
            "height": ws.height,
            "obstacles": [list(c) for c in sorted(ws.obstacles, key=ws.index)],
            "starts": [list(c) for c in self.starts],
            "goals": [list(c) for c in self.goals],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> Instance:
        try:
            ws = Workspace(
                int(data["width"]),
                int(data["height"]),
                frozenset(Cell(int(x), int(y)) for x, y in data.get("obstacles", [])),
            )
            return cls(
                ws,
                tuple(Cell(int(x), int(y)) for x, y in data["starts"]),
                tuple(Cell(int(x), int(y)) for x, y in data["goals"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InstanceError):
                raise
            raise ParseError(f"bad instance JSON: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> Instance:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# MovingAI formats


def parse_map(text: str) -> Workspace:
    """Parse a MovingAI ``.map`` file.

    Only ``.`` and ``G`` are passable; ``@``, ``O`` and ``T`` are obstacles.
    Any other terrain character is rejected.
    """
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        if raw == "map":
            break
        key, _, value = raw.partition(" ")
        if key not in ("type", "height", "width"):
            raise ParseError(f"unexpected header entry {raw!r}", i)
        header[key] = value.strip()
    else:
        raise ParseError("missing 'map' line", i)
    for key in ("height", "width"):
        if key not in header:
            raise ParseError(f"missing '{key}' header", i)
        if not header[key].isdigit():
            raise ParseError(f"bad {key} value {header[key]!r}", i)
    height, width = int(header["height"]), int(header["width"])

    obstacles = set()
    rows = lines[i:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise ParseError(f"expected {height} map rows, found {len(rows)}", i + len(rows))
    for y, row in enumerate(rows):
        lineno = i + y + 1
        row = row.rstrip("\r\n")
        if len(row) != width:
            raise ParseError(f"row has {len(row)} characters, expected {width}", lineno)
        for x, ch in enumerate(row):
            if ch in BLOCKED:
                obstacles.add(Cell(x, y))
            elif ch not in PASSABLE:
                raise ParseError(f"unknown terrain character {ch!r}", lineno)
    return Workspace(width, height, frozenset(obstacles))


def emit_map(ws: Workspace) -> str:
    out = ["type octile", f"height {ws.height}", f"width {ws.width}", "map"]
    for y in range(ws.height):
        out.append(
            "".join("@" if (x, y) in ws.obstacles else "." for x in range(ws.width))
        )
    return "\n".join(out) + "\n"


def parse_scen(text: str, n: int, ws: Workspace) -> Instance:
    """Build an instance from the first ``n`` rows of a version-1 scenario.

    Row ``i`` contributes start ``(start_x, start_y)`` for robot ``i`` and
    goal ``(goal_x, goal_y)`` for goal ``i``.
    """
    if n < 0:
        raise InstanceError("robot count must be non-negative")
    lines = text.splitlines()
    if not lines or not lines[0].strip().lower().startswith("version"):
        raise ParseError("missing 'version' line", 1)
    starts, goals = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if len(starts) == n:
            break
        if not raw.strip():
            continue
        fields = raw.split("\t") if "\t" in raw else raw.split()
        if len(fields) < 9:
            raise ParseError(f"expected 9 fields, found {len(fields)}", lineno)
        try:
            sx, sy, gx, gy = (int(v) for v in fields[4:8])
        except ValueError as exc:
            raise ParseError(f"bad coordinate: {exc}", lineno) from exc
        for c in ((sx, sy), (gx, gy)):
            if not ws.in_bounds(c):
                raise InstanceError(f"line {lineno}: cell {c} out of bounds")
        starts.append(Cell(sx, sy))
        goals.append(Cell(gx, gy))
    if len(starts) < n:
        raise InstanceError(f"scenario has {len(starts)} rows, {n} requested")
    return Instance(ws, tuple(starts), tuple(goals))


def emit_scen(inst: Instance, map_name: str = "instance.map") -> str:
    """Version-1 scenario text. Requires as many goals as robots."""
    if inst.num_robots != inst.num_goals:
        raise InstanceError("scenario rows pair each start with one goal")
    ws = inst.workspace
    out = ["version 1"]
    for s, g in zip(inst.starts, inst.goals):
        out.append(
            f"0\t{map_name}\t{ws.width}\t{ws.height}\t{s.x}\t{s.y}\t{g.x}\t{g.y}\t{manhattan(s, g)}"
        )
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Random instances


def random_instance(
    seed: int,
    width: int,
    height: int,
    obstacle_density: float,
    n: int,
    max_tries: int = 100,
) -> Instance:
    """Seeded random instance with ``floor(density * W * H)`` obstacles.

    Starts and goals are disjoint free cells. Each robot shares a connected
    component with at least one goal and vice versa; layouts violating this
    are redrawn up to ``max_tries`` times.
    """
    if not 0 <= obstacle_density < 1:
        raise InstanceError("obstacle density must lie in [0, 1)")
    total = width * height
    n_obst = int(obstacle_density * total)
    if total - n_obst < 2 * n:
        raise InstanceError(f"{total - n_obst} free cells cannot hold {n} starts and goals")
    rng = random.Random(seed)
    all_cells = [Cell(x, y) for y in range(height) for x in range(width)]
    for _ in range(max_tries):
        obstacles = frozenset(rng.sample(all_cells, n_obst))
        ws = Workspace(width, height, obstacles)
        free = [c for c in all_cells if c not in obstacles]
        picked = rng.sample(free, 2 * n)
        starts, goals = tuple(picked[:n]), tuple(picked[n:])
        comp = ws.components
        start_comps = {comp[c] for c in starts}
        goal_comps = {comp[c] for c in goals}
        if start_comps <= goal_comps and goal_comps <= start_comps:
            return Instance(ws, starts, goals)
    raise InstanceError(f"no reachable layout after {max_tries} tries")


# ---------------------------------------------------------------------------
# Distance fields


@dataclass(frozen=True)
class DistanceField:
    goal: Cell
    dist: dict

    def __call__(self, c) -> int | None:
        return self.dist.get(c)

    def reachable(self, c) -> bool:
        return c in self.dist


def true_distance_field(ws: Workspace, goal: Cell) -> DistanceField:
    """Breadth-first move counts to ``goal``; unreachable cells are absent."""
    if not ws.is_free(goal):
        raise InstanceError(f"goal {tuple(goal)} is not a free cell")
    goal = Cell(*goal)
    dist = {goal: 0}
    queue = deque([goal])
    adj = ws.adjacency
    while queue:
        c = queue.popleft()
        d = dist[c] + 1
        for n in adj[c]:
            if n not in dist:
                dist[n] = d
                queue.append(n)
    return DistanceField(goal, dist)


def cells_from_pairs(pairs: Iterable) -> tuple[Cell, ...]:
    return tuple(Cell(int(x), int(y)) for x, y in pairs)
