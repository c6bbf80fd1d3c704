import itertools
from collections import Counter

import numpy as np
import pytest

from safeset.nflbench import (ExplorationOrder, SystemTable, bump_first, cost_distribution, count_consistent,
                              enumerate_systems, full_space, n_systems, run_table, verify_nfl)


@pytest.mark.parametrize("ns,na,count", [(1, 1, 1), (2, 2, 16), (3, 2, 729)])
def test_enumeration_counts(ns, na, count):
    tables = [t.table for t in enumerate_systems(ns, na)]
    assert len(tables) == count == n_systems(ns, na)
    assert len(set(tables)) == count and tables == sorted(tables)


def test_enumeration_cap():
    with pytest.raises(ValueError):
        list(enumerate_systems(4, 4, cap=1000))
    with pytest.raises(ValueError):
        SystemTable(2, 2, (0, 1, 2, 0))


@pytest.mark.parametrize("ns,na,expect", [(1, 1, 1), (2, 2, 8), (3, 2, 243)])
def test_count_consistent(ns, na, expect):
    for s, u, t in itertools.product(range(ns), range(na), range(ns)):
        assert count_consistent(ns, na, (s, u, t)) == expect == n_systems(ns, na) // ns


def test_run_table_absorbs():
    f = SystemTable(3, 2, (2, 0, 1, 1, 0, 0))  # f(0,0)=2 is the failure state
    assert run_table(f, 0, (0, 1, 1), frozenset({2})) == (2, 2, 2)
    assert run_table(f, 0, (1, 0), frozenset({2})) == (0, 2)


def test_m_zero_is_single_empty_sequence():
    o = ExplorationOrder.lexicographic(2, 2, 1)
    assert cost_distribution(o, 0) == Counter({(): 16})


def test_first_step_tally_and_symmetry():
    a = ExplorationOrder([(0, (0,)), (0, (1,)), (1, (0,)), (1, (1,))], 2, 2, 1)
    b = ExplorationOrder([(0, (1,)), (1, (1,)), (0, (0,)), (1, (0,))], 2, 2, 1)
    assert cost_distribution(a, 1) == Counter({(False,): 8, (True,): 8})
    assert cost_distribution(b, 1) == cost_distribution(a, 1)


@pytest.mark.parametrize("cost", ["failure", "identity"])
def test_two_state_random_orders_equal(cost):
    rng = np.random.default_rng(0)
    for _ in range(10):
        o1 = ExplorationOrder.random(2, 2, 1, rng)
        o2 = ExplorationOrder.random(2, 2, 1, rng)
        for m in (1, 2, 3):
            v = verify_nfl(o1, o2, m, cost)
            assert v.equal and v.first_difference is None
            assert sum(v.tally1.values()) == 16


def test_identical_orders_equal_and_corruption_detected():
    o = ExplorationOrder.lexicographic(3, 2, 2)
    assert verify_nfl(o, o, 2, "identity").equal
    v = verify_nfl(o, o, 2, "identity", corrupt=bump_first)
    assert not v.equal and v.first_difference is not None
    assert v.to_json()["equal"] is False


def test_orders_must_share_space():
    with pytest.raises(ValueError):
        verify_nfl(ExplorationOrder.lexicographic(2, 2, 1), ExplorationOrder.lexicographic(3, 2, 1), 1)
    with pytest.raises(ValueError):
        ExplorationOrder([(0, (0,))], 2, 2, 1)
    with pytest.raises(ValueError):
        cost_distribution(ExplorationOrder.lexicographic(2, 2, 1), 5)


def test_tallies_sum_to_system_count():
    o = ExplorationOrder.random(3, 2, 2, np.random.default_rng(4))
    for m in range(4):
        for cost in ("failure", "identity"):
            assert sum(cost_distribution(o, m, cost).values()) == 729


def test_parallel_tally_matches_sequential():
    o = ExplorationOrder.random(3, 2, 2, np.random.default_rng(1))
    assert cost_distribution(o, 2, "identity", workers=3) == cost_distribution(o, 2, "identity", workers=1)


def test_identity_cost_induction_step():
    # k = 1: each further distinct pair splits every tally entry evenly over the states
    for ns, na in ((2, 2), (3, 2)):
        o = ExplorationOrder.random(ns, na, 1, np.random.default_rng(ns))
        for m in range(len(o)):
            lo = cost_distribution(o, m, "identity")
            hi = cost_distribution(o, m + 1, "identity")
            for key, c in hi.items():
                assert c * ns == lo[key[:-1]]


def test_two_step_runs_depend_on_action_pattern():
    # With k = 2 the second transition of a run can reuse the first table entry.
    # u = (0, 0) from state 0 records (0, 0) whenever f(0,0) = 0: 3^5 tables.
    # u = (0, 1) needs f(0,0) = 0 and f(0,1) = 0: 3^4 tables.
    space = full_space(3, 2, 2)
    first = [(0, (0, 0))] + [p for p in space if p != (0, (0, 0))]
    second = [(0, (0, 1))] + [p for p in space if p != (0, (0, 1))]
    a = cost_distribution(ExplorationOrder(first, 3, 2, 2), 1, "identity")
    b = cost_distribution(ExplorationOrder(second, 3, 2, 2), 1, "identity")
    assert a[((0, 0),)] == 243
    assert b[((0, 0),)] == 81
