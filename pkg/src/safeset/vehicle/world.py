"""Two vehicles on a straight three-lane road, stepped at 10 Hz.

Vehicle 0 is the subject vehicle (SV), vehicle 1 the principal other vehicle
(POV) driven by a testing policy.  Longitudinal motion is forward Euler on
point masses; lateral motion tracks the commanded lane centre with a
critically damped second-order law whose lateral acceleration is capped,
integrated on ten sub-steps per period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

N_LANES = 3


@dataclass(frozen=True)
class VehicleParams:
    dt: float = 0.1
    lane_width: float = 3.7
    length: float = 5.0
    width: float = 2.0
    v_max: float = 25.0
    a_min: float = -6.0
    a_max: float = 3.0
    dx_cap: float = 50.0
    lateral_omega: float = 2.5
    lateral_acc_max: float = 2.0
    # a vehicle is "settled" once this close to its lane centre
    settle_tol: float = 0.1
    # IDM
    idm_v_des: float = 25.0
    idm_a: float = 3.0
    idm_b: float = 5.0
    idm_s0: float = 2.0
    idm_T: float = 1.5
    idm_delta: float = 4.0
    # MOBIL
    mobil_politeness: float = 0.3
    mobil_b_safe: float = 5.0
    mobil_threshold: float = 0.2
    # lane changes are reconsidered once per this many seconds
    mobil_period: float = 1.0
    # adversaries
    gap_accept: float = 2.0
    brake: float = -6.0
    ttc_window: tuple = (0.0, 2.0)
    ttc_formula: str = "dx"
    cut_in_tol: float = 0.5
    predict_horizon: float = 1.0
    predict_accels: tuple = (-6.0, -3.0, 0.0, 3.0)

    def __post_init__(self):
        if self.gap_accept < 0:
            raise ValueError("gap acceptance must be non-negative")
        lo, hi = self.ttc_window
        if not lo < hi:
            raise ValueError("TTC window must have lower < upper")
        if self.ttc_formula not in ("dx", "dy"):
            raise ValueError("ttc_formula must be 'dx' or 'dy'")

    @classmethod
    def from_dict(cls, doc: dict | None) -> "VehicleParams":
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)}
        bad = set(doc) - known
        if bad:
            raise ValueError(f"unknown vehicle parameters: {sorted(bad)}")
        for key in ("ttc_window", "predict_accels"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return replace(cls(), **doc)

    def lane_center(self, lane: int) -> float:
        return lane * self.lane_width

    def lane_of(self, y: float) -> int:
        return int(min(max(round(y / self.lane_width), 0), N_LANES - 1))


@dataclass
class Car:
    x: float
    y: float
    v: float
    lane: int
    vy: float = 0.0


@dataclass
class VehicleWorld:
    sv: Car
    pov: Car
    params: VehicleParams = field(default_factory=VehicleParams)
    t: int = 0
    collided: bool = False
    subject: str = "c"
    # step offset of the subject's lane-change decision timer
    mobil_phase: int = 0
    # per-run memory for testing policies
    memory: dict = field(default_factory=dict)
    # (step, old lane, new lane, d_x) for every POV lane command change
    pov_lane_changes: list = field(default_factory=list)

    def gap(self) -> float:
        """Bumper gap from the SV front to the POV rear (negative once passed)."""
        return self.pov.x - self.sv.x - self.params.length

    def dy(self) -> float:
        return self.pov.y - self.sv.y

    def project(self) -> np.ndarray:
        """OSS coordinates (d_x, d_y, v0, v1) with the headway capped."""
        return np.array([min(self.gap(), self.params.dx_cap), self.dy(), self.sv.v, self.pov.v])

    def in_collision(self) -> bool:
        p = self.params
        return -2 * p.length < self.gap() <= 0.0 and abs(self.dy()) <= p.width / 2

    def settled(self, car: Car) -> bool:
        return abs(car.y - self.params.lane_center(car.lane)) < self.params.settle_tol


def init_world(s0, params: VehicleParams | None = None, subject: str = "c", mobil_phase: int = 0) -> VehicleWorld:
    """World realizing OSS state ``(d_x, d_y, v0, v1)`` with the SV in the middle lane."""
    p = params or VehicleParams()
    dx, dy, v0, v1 = (float(x) for x in s0)
    y0 = p.lane_center(1)
    sv = Car(0.0, y0, v0, 1)
    pov = Car(dx + p.length, y0 + dy, v1, p.lane_of(y0 + dy))
    w = VehicleWorld(sv, pov, p, subject=subject, mobil_phase=int(mobil_phase))
    w.collided = w.in_collision()
    return w


_SUB = 10


def _lateral(y: float, vy: float, target: float, p: VehicleParams) -> tuple[float, float]:
    h = p.dt / _SUB
    w = p.lateral_omega
    cap = p.lateral_acc_max
    for _ in range(_SUB):
        a = w * w * (target - y) - 2.0 * w * vy
        a = min(max(a, -cap), cap)
        vy += a * h
        y += vy * h
    return y, vy


def _advance(car: Car, a: float, lane: int, p: VehicleParams) -> None:
    a = min(max(a, p.a_min), p.a_max)
    car.x += car.v * p.dt
    car.v = min(max(car.v + a * p.dt, 0.0), p.v_max)
    car.lane = int(min(max(lane, 0), N_LANES - 1))
    car.y, car.vy = _lateral(car.y, car.vy, p.lane_center(car.lane), p)


def world_step(world: VehicleWorld, a0: float, lane0: int, a1: float, lane1: int) -> VehicleWorld:
    """Advance both vehicles one period in place and return the world."""
    p = world.params
    lane1 = int(min(max(lane1, 0), N_LANES - 1))
    if lane1 != world.pov.lane:
        world.pov_lane_changes.append((world.t, world.pov.lane, lane1, world.gap()))
    _advance(world.sv, a0, lane0, p)
    _advance(world.pov, a1, lane1, p)
    world.t += 1
    if world.in_collision():
        world.collided = True
    return world


def idm_accel(v: float, v_lead: float | None, gap: float, p: VehicleParams, v_des: float | None = None) -> float:
    """Intelligent driver model acceleration, clamped to the actuator range.

    ``gap=math.inf`` (or ``v_lead=None``) means a free road.
    """
    v_des = p.idm_v_des if v_des is None else v_des
    free = 1.0 - (v / v_des) ** p.idm_delta if v_des > 0 else (0.0 if v <= 0 else -math.inf)
    if v_lead is None or math.isinf(gap):
        a = p.idm_a * free
    elif gap <= 0:
        return p.a_min
    else:
        s_star = p.idm_s0 + max(0.0, v * p.idm_T + v * (v - v_lead) / (2 * math.sqrt(p.idm_a * p.idm_b)))
        a = p.idm_a * (free - (s_star / gap) ** 2)
    return float(min(max(a, p.a_min), p.a_max))


def _occupies(world: VehicleWorld, car: Car, lane: int) -> bool:
    """Whether ``car`` laterally overlaps ``lane`` enough to interact."""
    p = world.params
    return abs(car.y - p.lane_center(lane)) < (p.lane_width + p.width) / 2


def sv_leader(world: VehicleWorld, lane: int | None = None) -> tuple[float | None, float]:
    """(lead speed, gap) seen by the SV in ``lane`` (its own lane by default)."""
    if lane is None:
        ahead = world.pov.x >= world.sv.x and abs(world.dy()) < (world.params.lane_width + world.params.width) / 2
    else:
        ahead = world.pov.x >= world.sv.x and _occupies(world, world.pov, lane)
    if ahead:
        return world.pov.v, world.gap()
    return None, math.inf


def subject_idm(world: VehicleWorld) -> float:
    v_lead, gap = sv_leader(world)
    return idm_accel(world.sv.v, v_lead, gap, world.params)


def mobil_decision(world: VehicleWorld) -> int:
    """Lane the SV commands: a neighbour lane if MOBIL approves, else its own."""
    p = world.params
    sv, pov = world.sv, world.pov
    every = max(1, int(round(p.mobil_period / p.dt)))
    if (world.t + world.mobil_phase) % every or not world.settled(sv):
        return sv.lane
    a_cur = subject_idm(world)
    # the POV is the old follower when it trails the SV in the SV lane
    pov_behind_here = pov.x < sv.x and _occupies(world, pov, sv.lane)
    rear_gap = sv.x - pov.x - p.length
    best, best_gain = sv.lane, p.mobil_threshold
    for lane in (sv.lane + 1, sv.lane - 1):
        if not 0 <= lane < N_LANES:
            continue
        v_lead, gap = sv_leader(world, lane)
        a_new = idm_accel(sv.v, v_lead, gap, p)
        others = 0.0
        if _occupies(world, pov, lane):
            if abs(pov.x - sv.x) < p.length + p.gap_accept:
                continue
            if pov.x < sv.x:
                a_f_new = idm_accel(pov.v, sv.v, rear_gap, p)
                if a_f_new < -p.mobil_b_safe:
                    continue
                others += a_f_new - idm_accel(pov.v, None, math.inf, p)
        if pov_behind_here:
            others += idm_accel(pov.v, None, math.inf, p) - idm_accel(pov.v, sv.v, rear_gap, p)
        gain = a_new - a_cur + p.mobil_politeness * others
        if gain > best_gain:
            best, best_gain = lane, gain
    return best


def subject_act(world: VehicleWorld) -> tuple[float, int]:
    """Subject decision: ``c`` follows with IDM only, ``a`` adds MOBIL lane changes."""
    a = subject_idm(world)
    lane = mobil_decision(world) if world.subject == "a" else world.sv.lane
    return a, lane


def project_many(worlds) -> np.ndarray:
    return np.array([w.project() for w in worlds])
