import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amapf.grid import Cell, Instance, Workspace, true_distance_field
from amapf.pathfinding import (
    EMPTY,
    ConstraintSet,
    EdgeConstraint,
    PathPlanner,
    VertexConstraint,
    astar,
    path_cost,
    violates,
)

from conftest import ascii_instance


def layered_cost(ws, start, goal, cset):
    """Reference: breadth-first over explicit (cell, t) layers.

    The answer is the first t at which the goal is reachable and no later
    vertex constraint sits on the goal.
    """
    vertex = {(c.cell, c.t) for c in cset.vertex}
    edge = {(c.frm, c.to, c.t) for c in cset.edge}
    last_goal = max((c.t for c in cset.vertex if c.cell == goal), default=-1)
    horizon = cset.max_time + ws.width * ws.height + 2
    if (start, 0) in vertex:
        return None
    layer = {start}
    for t in range(horizon + 1):
        if goal in layer and t > last_goal:
            return t
        nxt = set()
        for c in layer:
            x, y = c
            for n in (c, (x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                n = Cell(*n)
                if ws.is_free(n) and (n, t + 1) not in vertex and (c, n, t) not in edge:
                    nxt.add(n)
        layer = nxt
    return None


def assert_legal(ws, path, start, goal, cset):
    assert path[0] == start and path[-1] == goal
    for a, b in zip(path, path[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) <= 1
        assert ws.is_free(b)
    assert violates(path, cset) == []


def test_path_cost_final_arrival():
    a, b = Cell(0, 0), Cell(1, 0)
    assert path_cost((a,)) == 0
    assert path_cost((a, b)) == 1
    assert path_cost((a, a, b)) == 2  # waits before arrival count
    assert path_cost((a, b, b, b)) == 1  # waits after arrival are free
    assert path_cost((a, b, a, b)) == 3
    with pytest.raises(ValueError):
        path_cost(())


def test_constraint_set_canonical():
    v = VertexConstraint(2, Cell(1, 1))
    e = EdgeConstraint(1, Cell(0, 0), Cell(0, 1))
    a = ConstraintSet([v, e])
    b = EMPTY.add(e).add(v)
    assert a == b and hash(a) == hash(b)
    assert a.add(v) is a
    assert a.max_time == 2
    assert a.last_time_at(Cell(1, 1)) == 2
    assert a.last_time_at(Cell(3, 3)) == -1


def test_unconstrained_equals_distance():
    inst = ascii_instance(["....", ".@@.", "...."], [(0, 0)], [(3, 2)])
    ws = inst.workspace
    path = astar(ws, Cell(0, 0), Cell(3, 2))
    assert path_cost(path) == true_distance_field(ws, Cell(3, 2))(Cell(0, 0)) == 5


def test_corridor_vertex_constraint_forces_wait():
    ws = Workspace(4, 1, frozenset())
    cset = EMPTY.add(VertexConstraint(1, Cell(1, 0)))
    path = astar(ws, Cell(0, 0), Cell(3, 0), cset)
    assert path == (Cell(0, 0), Cell(0, 0), Cell(1, 0), Cell(2, 0), Cell(3, 0))
    assert path_cost(path) == 4


def test_corridor_edge_constraint():
    ws = Workspace(3, 1, frozenset())
    cset = EMPTY.add(EdgeConstraint(0, Cell(0, 0), Cell(1, 0)))
    path = astar(ws, Cell(0, 0), Cell(2, 0), cset)
    assert path_cost(path) == 3 and path[1] == Cell(0, 0)


def test_goal_constraint_after_arrival_delays_final_arrival():
    ws = Workspace(3, 2, frozenset())
    cset = EMPTY.add(VertexConstraint(5, Cell(1, 0)))
    path = astar(ws, Cell(0, 0), Cell(1, 0), cset)
    assert path_cost(path) == 6
    assert_legal(ws, path, Cell(0, 0), Cell(1, 0), cset)


def test_infeasible_cases():
    ws = Workspace(3, 1, frozenset({Cell(1, 0)}))
    assert astar(ws, Cell(0, 0), Cell(2, 0)) is None
    ws = Workspace(2, 1, frozenset())
    assert astar(ws, Cell(0, 0), Cell(1, 0), EMPTY.add(VertexConstraint(0, Cell(0, 0)))) is None
    # dead-end cell blocked at every time the robot could leave it
    ws = Workspace(2, 1, frozenset())
    cset = ConstraintSet([VertexConstraint(1, Cell(1, 0)), VertexConstraint(1, Cell(0, 0))])
    assert astar(ws, Cell(0, 0), Cell(1, 0), cset) is None


def test_planner_memo_hits_and_infeasible_marker():
    inst = ascii_instance(["...", ".@.", "..."], [(0, 0)], [(2, 2)])
    planner = PathPlanner(inst, verify_hits=True)
    cset = EMPTY.add(VertexConstraint(1, Cell(1, 0)))
    first = planner.get_constrained_path(0, 0, cset)
    again = planner.get_constrained_path(0, 0, cset)
    assert first == again
    assert planner.cache.hits == 1 and planner.astar_calls == 2  # verification replans
    assert planner.hit_mismatches == 0

    blocked = EMPTY.add(VertexConstraint(0, Cell(0, 0)))
    assert planner.get_constrained_path(0, 0, blocked) is None
    assert planner.get_constrained_path(0, 0, blocked) is None
    assert planner.cache.hits == 2


def test_planner_without_memo_always_plans():
    inst = ascii_instance(["..."], [(0, 0)], [(2, 0)])
    planner = PathPlanner(inst, memo=False)
    planner.get_constrained_path(0, 0)
    planner.get_constrained_path(0, 0)
    assert planner.astar_calls == 2 and len(planner.cache) == 0


@st.composite
def constrained_problem(draw):
    w = draw(st.integers(2, 5))
    h = draw(st.integers(1, 4))
    cells = [Cell(x, y) for y in range(h) for x in range(w)]
    obstacles = frozenset(draw(st.lists(st.sampled_from(cells), max_size=len(cells) // 3)))
    free = [c for c in cells if c not in obstacles]
    if len(free) < 2:
        obstacles, free = frozenset(), cells
    start = draw(st.sampled_from(free))
    goal = draw(st.sampled_from(free))
    cons = []
    for _ in range(draw(st.integers(0, 6))):
        t = draw(st.integers(0, 7))
        c = draw(st.sampled_from(free))
        if draw(st.booleans()):
            cons.append(VertexConstraint(t, c))
        else:
            x, y = c
            n = draw(st.sampled_from([(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]))
            cons.append(EdgeConstraint(t, c, Cell(*n)))
    return Workspace(w, h, obstacles), start, goal, ConstraintSet(cons)


@settings(max_examples=400, deadline=None)
@given(constrained_problem(), st.booleans())
def test_astar_matches_layered_reference(problem, exact_heuristic):
    ws, start, goal, cset = problem
    expected = layered_cost(ws, start, goal, cset)
    hfield = true_distance_field(ws, goal) if exact_heuristic else None
    path = astar(ws, start, goal, cset, hfield)
    if expected is None:
        assert path is None
    else:
        assert path is not None and path_cost(path) == expected
        assert_legal(ws, path, start, goal, cset)


@settings(max_examples=200, deadline=None)
@given(constrained_problem(), st.integers(0, 6), st.booleans())
def test_adding_constraint_never_lowers_cost(problem, t, vertex):
    ws, start, goal, cset = problem
    base = astar(ws, start, goal, cset)
    if base is None:
        return
    # constrain the found path itself, which must then get no cheaper
    c = base[min(t, len(base) - 1)]
    extra = VertexConstraint(t, c)
    if not vertex and t + 1 < len(base) and base[t] != base[t + 1]:
        extra = EdgeConstraint(t, base[t], base[t + 1])
    more = astar(ws, start, goal, cset.add(extra))
    if more is not None:
        assert path_cost(more) >= path_cost(base)


def test_instance_level_planner_respects_extra_goal():
    inst = Instance(Workspace(3, 1, frozenset()), ((0, 0),), ((2, 0), (1, 0)))
    planner = PathPlanner(inst)
    assert path_cost(planner.plan(0, 0)) == 2
    assert path_cost(planner.plan(0, 1)) == 1
