import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safeset.core import execute_run, failure_cost
from safeset.vehicle import (LABELS, BrakeToStop, Hybrid, Learned, Predictive, Steady, VehicleParams,
                             VehicleSystem, idm_accel, init_world, make_adversary, mobil_decision, vehicle_oss,
                             world_step)
from safeset.vehicle.adversaries import n_params
from safeset.vehicle.es import EsParams, RewardSpec, es_train
from safeset.vehicle.world import Car, VehicleWorld

P = VehicleParams()


def world(dx, dy, v0, v1, subject="c"):
    return init_world([dx, dy, v0, v1], P, subject)


def test_straight_step_kinematics():
    w = world(20, 0, 10, 12)
    x0, x1 = w.sv.x, w.pov.x
    world_step(w, 0.0, 1, 0.0, 1)
    assert w.sv.x == pytest.approx(x0 + 1.0) and w.pov.x == pytest.approx(x1 + 1.2)
    assert (w.sv.v, w.pov.v) == (10, 12) and w.sv.y == pytest.approx(3.7)


def test_hard_brake_clamps_at_zero():
    w = world(20, 0, 1.0, 5)
    world_step(w, -6.0, 1, 0.0, 1)
    assert w.sv.v == pytest.approx(0.4)
    world_step(w, -6.0, 1, 0.0, 1)
    assert w.sv.v == 0.0
    world_step(w, -1.0, 1, 0.0, 1)
    assert w.sv.v == 0.0 and w.t == 3


def test_lane_change_converges_monotonically():
    w = world(40, 0, 10, 10)
    ys = []
    for _ in range(30):
        world_step(w, 0.0, 2, 0.0, 1)
        ys.append(w.sv.y)
    assert all(b >= a - 1e-12 for a, b in zip(ys, ys[1:]))
    assert ys[-1] <= 7.4 + 1e-9 and abs(ys[-1] - 7.4) < 0.1


def test_idm_examples():
    assert idm_accel(P.idm_v_des, None, math.inf, P) == pytest.approx(0.0, abs=1e-12)
    assert idm_accel(0.0, None, math.inf, P) == pytest.approx(P.idm_a)
    v = 15.0
    gap = P.idm_s0 + v * P.idm_T
    expect = P.idm_a * (1 - (v / P.idm_v_des) ** 4 - 1)
    assert idm_accel(v, v, gap, P) == pytest.approx(expect)
    assert expect < 0
    assert idm_accel(10, 0, 0.0, P) == P.a_min
    assert idm_accel(25, 0, 0.5, P) == P.a_min


def test_mobil_changes_when_lead_brakes_hard():
    w = world(8, 0, 20, 0, subject="a")
    assert mobil_decision(w) in (0, 2)


def test_mobil_stays_when_adjacent_lane_is_blocked():
    w = world(8, 0, 20, 0, subject="a")
    # the POV alongside in lane 2 blocks that lane; lane 0 is clear
    w.pov = Car(w.sv.x + 1.0, P.lane_center(2), 20.0, 2)
    assert mobil_decision(w) != 2


def test_mobil_stays_without_incentive():
    w = world(50, 3.7, 20, 20, subject="a")
    assert mobil_decision(w) == 1


def test_simple_adversaries():
    w = world(20, 0, 10, 12)
    assert Steady().decide(w) == (0.0, 1)
    assert BrakeToStop().decide(w) == (-6.0, 1)
    assert make_adversary("s").act(None, w).tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        make_adversary("x")


def test_hybrid_regulates_before_cutting_in():
    w = world(30, 3.7, 10, 10)  # beside, no closing speed: TTC infinite
    a, lane = Hybrid().decide(w)
    assert lane == 2 and a <= 0.0
    assert w.memory["h"]["phase"] == "approach"


def test_hybrid_cuts_in_inside_ttc_window():
    w = world(10, 3.7, 15, 10)  # TTC = 10 / 5 = 2 s
    a, lane = Hybrid().decide(w)
    assert lane == 1 and w.memory["h"]["phase"] == "cut"


def test_hybrid_in_lane_brakes():
    w = world(10, 0, 15, 10)
    assert Hybrid().decide(w) == (P.brake, 1)


def test_predictive_prefers_the_subject_lane():
    w = world(20, 3.7, 15, 15)
    a, lane = Predictive().decide(w)
    assert lane == 1


def test_gap_acceptance_refuses_lane_entry():
    w = world(1.0, 3.7, 15, 10)
    a, lane = Hybrid().decide(w)
    assert lane == 2
    a, lane = Predictive().decide(w)
    assert lane == 2


def test_learned_shapes_and_roundtrip(tmp_path):
    n = n_params((4, 32, 4))
    assert n == 4 * 32 + 32 + 32 * 4 + 4
    with pytest.raises(ValueError):
        Learned(np.zeros(n - 1))
    pol = Learned.load()
    back = Learned.from_json(pol.to_json())
    obs = np.array([12.0, 3.7, 10.0, 8.0])
    assert np.array_equal(back.forward(obs), pol.forward(obs))
    path = tmp_path / "t.json"
    path.write_text(__import__("json").dumps(pol.to_json()))
    assert np.array_equal(Learned.load(path).theta, pol.theta)


def test_oss_box_and_failure():
    oss = vehicle_oss()
    assert oss.lower.tolist() == [0, -3.7, 0, 0] and oss.upper.tolist() == [50, 3.7, 25, 25]
    assert oss.is_failure([0.0, 0.5, 1, 1]) and not oss.is_failure([0.1, 0.0, 1, 1])
    assert not oss.is_failure([0.0, 1.5, 1, 1])


def test_subject_a_hybrid_collides_more_than_learned():
    sys = VehicleSystem("a")
    s0 = [10.0, -3.7, 5.0, 20.0]
    h = sum(execute_run(sys, make_adversary("h"), s0, 100, sd).hit_failure for sd in range(10))
    e = sum(execute_run(sys, make_adversary("e"), s0, 100, sd).hit_failure for sd in range(10))
    assert h >= 5 and h > e


def _replay(system, actor, s0, seed, k=100):
    w = system.reset(np.asarray(s0, dtype=float), seed)
    for _ in range(k):
        w = system.step(w, actor.act(None, w))
        if w.collided:
            break
    return w


states = st.tuples(st.floats(0.5, 50), st.floats(-3.7, 3.7), st.floats(0, 25), st.floats(0, 25))


@settings(max_examples=60, deadline=None)
@given(s0=states, label=st.sampled_from(LABELS), subject=st.sampled_from("ac"), seed=st.integers(0, 1000))
def test_run_properties(s0, label, subject, seed):
    sys = VehicleSystem(subject)
    if sys.oss.is_failure(s0):
        return
    actor = make_adversary(label)
    run = execute_run(sys, actor, s0, 60, seed)
    again = execute_run(sys, actor, s0, 60, seed)
    assert run.fingerprint() == again.fingerprint()
    w = _replay(sys, make_adversary(label), s0, seed, 60)
    # collision flag and failure cost agree
    assert failure_cost(run) == w.collided
    # lane entries are only commanded with more than the acceptance gap
    assert all(gap > P.gap_accept for _, _, _, gap in w.pov_lane_changes)
    proj = w.project()
    assert proj.shape == (4,) and np.all(np.isfinite(proj)) and proj[0] <= P.dx_cap
    assert 0 <= w.sv.v <= P.v_max and 0 <= w.pov.v <= P.v_max
    assert -0.5 <= w.sv.y <= 7.4 + 0.5 and -0.5 <= w.pov.y <= 7.4 + 0.5


def test_params_validation_and_overrides():
    with pytest.raises(ValueError):
        VehicleParams(gap_accept=-1)
    with pytest.raises(ValueError):
        VehicleParams(ttc_window=(2.0, 0.0))
    with pytest.raises(ValueError):
        VehicleParams.from_dict({"nope": 1})
    p = VehicleParams.from_dict({"ttc_formula": "dy", "ttc_window": [0, 3]})
    assert p.ttc_window == (0, 3) and p.ttc_formula == "dy"


def test_es_zero_iterations_returns_initialization():
    es = EsParams(population=4, iterations=0, episodes=2, horizon=10)
    a = es_train(RewardSpec(), es, seed=3)
    b = es_train(RewardSpec(), EsParams(population=4, iterations=2, episodes=2, horizon=10), seed=3)
    assert a.curve[0]["mean"] == b.curve[0]["mean"] == a.initial_reward
    assert len(a.curve) == 1


def test_es_constant_reward_never_improves():
    es = EsParams(population=4, iterations=3, episodes=2, horizon=5)
    init = es_train(lambda run: 1.0, EsParams(population=4, iterations=0, episodes=2, horizon=5), seed=0)
    res = es_train(lambda run: 1.0, es, seed=0)
    assert np.array_equal(res.theta, init.theta) and res.best_reward == 1.0


def test_es_deterministic_and_non_decreasing():
    es = EsParams(population=4, iterations=3, episodes=3, horizon=30)
    a = es_train(RewardSpec(), es, seed=5, subject="c")
    b = es_train(RewardSpec(), es, seed=5, subject="c")
    assert np.array_equal(a.theta, b.theta)
    assert a.best_reward >= a.initial_reward
    best = [c["best"] for c in a.curve]
    assert all(y >= x for x, y in zip(best, best[1:]))


def test_es_rejects_bad_params():
    for kw in ({"population": 3}, {"sigma": 0.0}, {"lr": -1.0}, {"iterations": -1}):
        with pytest.raises(ValueError):
            EsParams(**kw)
