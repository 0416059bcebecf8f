import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amapf.cbs import (
    ALL_VARIANTS,
    STAT_FIELDS,
    Conflict,
    OpenList,
    SearchNode,
    Solver,
    Variant,
    create_constraints,
    get_first_conflict,
    solve,
)
from amapf.grid import Cell, Instance, InstanceError, Workspace, random_instance
from amapf.oracle import brute_optimal
from amapf.pathfinding import EdgeConstraint, VertexConstraint
from amapf.validation import validate_solution

from conftest import TIED_CONFLICT_5X5, ascii_instance

C = Cell


def node(cost):
    return SearchNode(False, 1, 0, None, (), (), (), cost)


def test_variant_parse_roundtrip():
    assert len(ALL_VARIANTS) == 8
    for v in ALL_VARIANTS:
        assert str(Variant.parse(v)) == v
    assert Variant.parse("h0m1p0") == Variant(False, True, False)
    with pytest.raises(ValueError):
        Variant.parse("h2m0p0")
    with pytest.raises(ValueError):
        Variant.parse("h1m1")


def test_vertex_conflict():
    paths = [(C(0, 0), C(1, 0), C(2, 0)), (C(1, 1), C(1, 0), C(1, 1))]
    assert get_first_conflict(paths) == Conflict(0, 1, "vertex", 1, C(1, 0))


def test_conflict_with_robot_resting_at_goal():
    paths = [(C(1, 0),), (C(3, 0), C(2, 0), C(1, 0), C(0, 0))]
    assert get_first_conflict(paths) == Conflict(0, 1, "vertex", 2, C(1, 0))


def test_swap_conflict():
    paths = [(C(0, 0), C(1, 0)), (C(1, 0), C(0, 0))]
    c = get_first_conflict(paths)
    assert c == Conflict(0, 1, "edge", 0, C(0, 0), C(1, 0))
    assert create_constraints(c) == (
        (0, EdgeConstraint(0, C(0, 0), C(1, 0))),
        (1, EdgeConstraint(0, C(1, 0), C(0, 0))),
    )


def test_following_is_not_a_conflict():
    paths = [(C(0, 0), C(1, 0), C(2, 0)), (C(1, 0), C(2, 0), C(3, 0))]
    assert get_first_conflict(paths) is None


def test_conflict_tie_break_smallest_pair():
    # robots 0/1 swap while robot 2 enters robot 1's start
    paths = [
        (C(0, 0), C(1, 0)),
        (C(1, 0), C(0, 0)),
        (C(5, 5), C(0, 0)),
    ]
    c = get_first_conflict(paths)
    assert (c.robot1, c.robot2, c.kind, c.t) == (0, 1, "edge", 0)
    paths = [(C(1, 0), C(1, 1)), (C(0, 0), C(0, 1)), (C(0, 2), C(0, 1)), (C(1, 2), C(1, 1))]
    c = get_first_conflict(paths)
    assert (c.robot1, c.robot2) == (0, 3)


def test_vertex_constraints_pair():
    c = Conflict(2, 5, "vertex", 4, C(1, 1))
    assert create_constraints(c) == ((2, VertexConstraint(4, C(1, 1))), (5, VertexConstraint(4, C(1, 1))))


def test_open_list_ordering():
    ol = OpenList()
    a, b, c = node(5), node(5), node(4)
    for n in (a, b, c):
        ol.push(n)
    assert ol.peek() is c
    assert ol.pop() is c
    ol.mark_registered(a)  # registered nodes go behind equal-cost peers
    assert ol.pop() is b
    assert ol.pop() is a
    assert not ol and len(ol) == 0


def test_single_robot_solo_path():
    inst = ascii_instance(["....", ".@@.", "...."], [(0, 0)], [(3, 2)])
    for v in ALL_VARIANTS:
        sol = solve(inst, v)
        assert sol.status == "solved" and sol.cost == 5


def test_anonymity_lets_robots_keep_their_places():
    inst = ascii_instance(["..."], [(0, 0), (2, 0)], [(2, 0), (0, 0)])
    sol = solve(inst)
    assert sol.cost == 0 and sol.M == (1, 0)


def test_no_feasible_matching_is_infeasible():
    inst = ascii_instance([".@."], [(0, 0)], [(2, 0)])
    for v in ("h0m0p0", "h1m1p1"):
        sol = solve(inst, v)
        assert sol.status == "infeasible" and sol.cost is None


def test_zero_robots():
    inst = Instance(Workspace(2, 2, frozenset()), (), ((0, 0),))
    sol = solve(inst)
    assert sol.solved and sol.cost == 0


def test_tied_conflict_layout_structure():
    inst = Instance.from_dict(TIED_CONFLICT_5X5)
    solver = Solver(inst, "h1m1p1")
    sol = solver.solve()
    assert sol.cost == 11
    assert solver.root_costs == [11, 11]
    assert sol.stats["assignments_postponed"] >= 1
    for v in ALL_VARIANTS:
        assert solve(inst, v).cost == 11


def test_cbs_ta_mode_keeps_no_record():
    inst = Instance.from_dict(TIED_CONFLICT_5X5)
    solver = Solver(inst, "h1m1p0")
    sol = solver.solve()
    assert sol.cost == 11
    assert solver.conflict_rec == [] and sol.stats["assignments_postponed"] == 0


def test_timeout_status():
    inst = random_instance(1, 32, 32, 0.2, 20)
    sol = solve(inst, "h0m0p0", timeout=1e-9)
    assert sol.status == "timeout" and sol.cost is None
    assert set(sol.stats) == set(STAT_FIELDS)


def test_solution_json_schema():
    inst = random_instance(2, 6, 6, 0.1, 3)
    sol = solve(inst)
    data = json.loads(json.dumps(sol.to_dict()))
    assert set(data) == {"cost", "assignment", "paths", "stats", "variant", "status"}
    assert [a["robot"] for a in data["assignment"]] == [0, 1, 2]
    M = [a["goal"] for a in data["assignment"]]
    assert validate_solution(inst, M, data["paths"], data["cost"]) == []


def test_stats_deterministic():
    inst = random_instance(9, 10, 10, 0.2, 6)
    a = solve(inst).stats
    b = solve(inst).stats
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_more_goals_than_robots():
    inst = ascii_instance(["....", ".@..", "...."], [(0, 0), (3, 2)], [(1, 0), (3, 1), (0, 2)])
    truth = brute_optimal(inst)
    for v in ALL_VARIANTS:
        sol = solve(inst, v)
        assert sol.cost == truth.cost


def test_memo_hits_agree_with_fresh_plans():
    inst = random_instance(21, 8, 8, 0.2, 4)
    solver = Solver(inst, "h1m1p1", verify_memo=True)
    sol = solver.solve()
    assert solver.planner.hit_mismatches == 0
    assert sol.cost == solve(inst, "h1m0p1").cost


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(3, 5), st.sampled_from([0.1, 0.2, 0.3]),
       st.integers(2, 3))
def test_all_variants_match_oracle(seed, side, od, n):
    try:
        inst = random_instance(seed, side, side, od, n)
    except InstanceError:
        return
    truth = brute_optimal(inst)
    for v in ALL_VARIANTS:
        sol = solve(inst, v, timeout=30)
        assert sol.cost == truth.cost, v
