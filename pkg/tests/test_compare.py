import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_space
from safeset.compare import (CONTAINED, EQUAL, FALSIFIED, FULL, INCOMPARABLE, LESS, MORE, SMALL_ESCAPE,
                             aggressiveness_order, compare_algorithms, diff_fraction, iou, mass_ratio, pair_row,
                             write_matrix_csv)
from safeset.core import FunctionPolicy, MarkovSystem
from safeset.covering import CoveringSet, build_covering
from safeset.quantify import quantify
from safeset.stats import ConfidenceSpec, MassFunction
from safeset.toys import constant_policy, push_sampler, push_system

SPACE = line_space(0, 10)
FULL_COVER = build_covering(SPACE, [0.5])  # centroids 0.5 .. 9.5


def cover(idx):
    return FULL_COVER.subset(sorted(idx))


def test_iou_and_diff_examples():
    a = cover([1, 2, 3])
    assert iou(a, a) == 1.0
    assert iou(cover([0]), cover([1])) == 0.0
    assert iou(cover([]), cover([])) == 1.0
    assert iou(cover([0, 1]), cover([1, 2])) == pytest.approx(1 / 3)
    assert diff_fraction(a, cover([0, 1, 2, 3]), FULL_COVER) == 0.0
    assert diff_fraction(FULL_COVER, cover([]), FULL_COVER) == 1.0
    big = build_covering(line_space(0, 45), [0.5])  # 45 centroids
    sub = big.subset(range(10))
    assert diff_fraction(sub, big.subset(range(7)), big) == pytest.approx(3 / 45)
    with pytest.raises(ValueError):
        iou(a, build_covering(SPACE, [1.0]))


def test_order_examples():
    assert aggressiveness_order(cover([1, 2]), cover([1, 2])) == EQUAL
    assert aggressiveness_order(cover([1]), cover([1, 2])) == MORE
    assert aggressiveness_order(cover([1, 2]), cover([1])) == LESS
    assert aggressiveness_order(cover([1, 3]), cover([1, 2])) == INCOMPARABLE


def test_risk_is_not_sufficient():
    # the smaller set need not be contained in the larger one
    small, large = cover([0, 1]), cover([2, 3, 4, 5])
    assert len(small) < len(large)
    assert aggressiveness_order(small, large) == INCOMPARABLE


subsets = st.sets(st.integers(0, 9))


@settings(max_examples=300, deadline=None)
@given(a=subsets, b=subsets, c=subsets)
def test_order_properties(a, b, c):
    A, B, C = cover(a), cover(b), cover(c)
    x = iou(A, B)
    assert x == iou(B, A) and 0.0 <= x <= 1.0
    assert (x == 1.0) == (a == b)
    o = aggressiveness_order(A, B)
    assert {MORE: LESS, LESS: MORE, EQUAL: EQUAL, INCOMPARABLE: INCOMPARABLE}[o] == aggressiveness_order(B, A)
    if o == MORE and aggressiveness_order(B, C) == MORE:
        assert aggressiveness_order(A, C) == MORE
    if a <= b:
        assert diff_fraction(A, B, FULL_COVER) == 0.0


def test_mass_ratio_examples():
    phi = cover(range(9))
    assert mass_ratio(phi, phi) == 0.0
    assert mass_ratio(FULL_COVER, phi) == pytest.approx(0.1)
    heavy = MassFunction(lambda s: 10.0 if s[0] < 9 else 1.0, "heavy")
    assert mass_ratio(FULL_COVER, phi, heavy) < 0.1
    with pytest.raises(ValueError):
        mass_ratio(phi, FULL_COVER)


# toy for the verdict branches: s' = s - u, failure below zero
def _down():
    return MarkovSystem("down", line_space(0, 10, lambda s: s[0] < 0), lambda s, u, rng: s - u[:1])


BRAKE = FunctionPolicy("brake-low", lambda s: 3.0 if s[0] < 5 else 0.0)  # Phi = {>= 5}
SINK = FunctionPolicy("sink", lambda s: 2.0 if s[0] >= 5 else 0.0)      # leaves Phi, never fails
NUDGE = FunctionPolicy("nudge", lambda s: 2.5 if 5 <= s[0] < 6 else 0.0)  # one escaping state
KILL = FunctionPolicy("kill", lambda s: 4.0)


def _cmp(te1, te2, eps=0.01, **kw):
    sys = _down()
    return compare_algorithms(te1, te2, sys.oss, sys, ConfidenceSpec(eps, 0.01), [0.5], seed=0, k=6,
                              max_runs=50_000, **kw)


def test_same_tester_short_circuits():
    v = _cmp(BRAKE, BRAKE)
    assert v.agg and v.outcome == CONTAINED and v.runs_used == ConfidenceSpec(0.01, 0.01).n
    assert v.escape_mass_ratio == 0.0


def test_failure_inside_phi1_falsifies():
    v = _cmp(BRAKE, KILL)
    assert not v.agg and v.outcome == FALSIFIED
    assert v.runs_used <= ConfidenceSpec(0.01, 0.01).n
    assert v.falsifying_run.hit_failure
    assert sorted(c[0] for c in v.phi1.centroids) == [5.5, 6.5, 7.5, 8.5, 9.5]
    assert "falsifying_run" in v.to_json()


def test_small_escape_branch():
    v = _cmp(BRAKE, NUDGE, eps=0.2)
    assert v.agg and v.outcome == SMALL_ESCAPE
    assert 0 < v.escape_mass_ratio < 0.2
    assert len(v.phi2) == len(v.phi1) + 1


def test_full_quantification_branch():
    v = _cmp(BRAKE, SINK)
    assert v.outcome == FULL and v.q2 is not None
    assert v.escape_mass_ratio >= 0.01
    assert v.agg  # SINK never fails, so its own set is the whole space
    assert v.runs_used == ConfidenceSpec(0.01, 0.01).n + v.q2.runs_total


def test_contained_when_te2_is_harmless():
    v = _cmp(BRAKE, constant_policy(0.0))
    assert v.agg and v.outcome == CONTAINED and v.escape_mass_ratio == 0.0


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_line12_cheaper_than_full_quantification(eps):
    sys = push_system()
    spec = ConfidenceSpec(eps, 1e-4)
    te1, te2 = push_sampler([0.0, 0.5, 1.0]), push_sampler([0.0, 0.5])
    v = compare_algorithms(te1, te2, sys.oss, sys, spec, [0.5], seed=0, k=12)
    assert v.outcome in (CONTAINED, SMALL_ESCAPE)
    from safeset.core import derive_seed
    q2 = quantify(sys.oss, sys, te2, spec, [0.5], derive_seed(0, 4, stream=8), 100_000, k=12)
    assert v.runs_used < q2.runs_total


def test_matrix_csv(tmp_path):
    rows = [pair_row("x", "y", cover([1, 2]), cover([2]), FULL_COVER)]
    write_matrix_csv(tmp_path / "m.csv", rows)
    got = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert got[0]["order"] == LESS and float(got[0]["diff_01"]) == pytest.approx(0.1)
