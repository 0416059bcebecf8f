import pytest

from amapf.grid import random_instance
from amapf.oracle import (
    OracleSizeError,
    brute_optimal,
    enumerate_matchings,
    joint_optimal,
    partition_optimal,
)
from amapf.validation import validate_solution

from conftest import ascii_instance

# corridor with a one-cell pocket under x = 1
POCKET = ["....", "@.@@"]


def test_enumerate_matchings_sorted_and_filtered():
    inst = ascii_instance(["...", ".@."], [(0, 0), (2, 1)], [(2, 0), (0, 1)])
    got = enumerate_matchings(inst)
    assert got == [((1, 0), 2), ((0, 1), 6)]  # the second detours the wall
    walled = ascii_instance([".@."], [(0, 0)], [(2, 0)])
    assert enumerate_matchings(walled) == []


def test_fixed_matching_swap_in_corridor_is_infeasible():
    inst = ascii_instance([".."], [(0, 0), (1, 0)], [(1, 0), (0, 0)])
    assert joint_optimal(inst, (0, 1)) is None  # each must pass the other
    assert joint_optimal(inst, (1, 0))[0] == 0


def test_robot_at_goal_steps_aside():
    inst = ascii_instance(POCKET, [(1, 0), (0, 0)], [(1, 0), (3, 0)])
    cost, paths = joint_optimal(inst, (0, 1))
    assert cost == 5
    assert validate_solution(inst, (0, 1), paths, cost) == []
    # anonymously the robots just shift along
    best = brute_optimal(inst)
    assert best.cost == 3 and best.M == (1, 0)


def test_crossing_needs_a_wait_for_fixed_matching():
    inst = ascii_instance(["...", "...", "..."], [(0, 1), (1, 0)], [(2, 1), (1, 2)])
    assert joint_optimal(inst, (0, 1))[0] == 5
    assert brute_optimal(inst).cost == 4


def test_cap_prunes():
    inst = ascii_instance(POCKET, [(1, 0), (0, 0)], [(1, 0), (3, 0)])
    assert joint_optimal(inst, (0, 1), cap=4) is None
    assert joint_optimal(inst, (0, 1), cap=5)[0] == 5


def test_partition_optimal():
    inst = ascii_instance(POCKET, [(1, 0), (0, 0)], [(1, 0), (3, 0)])
    assert partition_optimal(inst) == 3
    assert partition_optimal(inst, include={(0, 0)}) == 5
    assert partition_optimal(inst, omit={(0, 0), (0, 1)}) is None


def test_size_guard():
    big = random_instance(0, 10, 10, 0.1, 2)
    with pytest.raises(OracleSizeError):
        brute_optimal(big)
    many = random_instance(0, 8, 8, 0.1, 5)
    with pytest.raises(OracleSizeError):
        brute_optimal(many)


def test_counts_tied_optimal_matchings():
    inst = ascii_instance(["...", "..."], [(0, 0), (2, 0)], [(0, 1), (2, 1)])
    best = brute_optimal(inst)
    assert best.cost == 2 and best.optimal_matchings == 1
    assert validate_solution(inst, best.M, best.paths, best.cost) == []
