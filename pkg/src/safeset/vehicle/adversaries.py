"""Testing policies for the POV.

Every policy returns ``(acceleration, lane)``.  Lateral decisions are taken
only when the POV is settled in its lane, and any lane change is refused
while the bumper gap to the SV is within the gap-acceptance distance.
"""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from .world import N_LANES, VehicleWorld, idm_accel

LABELS = ("s", "b", "h", "p", "e")


def gap_ok(world: VehicleWorld) -> bool:
    return world.gap() > world.params.gap_accept


def _lane_request(world: VehicleWorld, lane: int) -> int:
    pov = world.pov
    if lane == pov.lane or not 0 <= lane < N_LANES:
        return pov.lane
    if not world.settled(pov) or not gap_ok(world):
        return pov.lane
    return lane


class Adversary:
    name = "adversary"
    label = "?"

    def decide(self, world: VehicleWorld) -> tuple[float, int]:
        raise NotImplementedError

    def act(self, state, sim) -> np.ndarray:
        a, lane = self.decide(sim)
        return np.array([a, float(lane)])

    def __repr__(self):
        return f"{type(self).__name__}()"


class Steady(Adversary):
    """Keeps the initial speed and lane."""

    name, label = "pi_s", "s"

    def decide(self, world):
        return 0.0, world.pov.lane


class BrakeToStop(Adversary):
    name, label = "pi_b", "b"

    def decide(self, world):
        return world.params.brake, world.pov.lane


class Hybrid(Adversary):
    """Brake-to-stop when started in the SV lane.  Otherwise regulate speed in
    the neighbour lane until the time-to-collision enters the window, cut in
    once, and brake to stop after the lane change is accomplished."""

    name, label = "pi_h", "h"

    def ttc(self, world: VehicleWorld) -> float:
        closing = world.sv.v - world.pov.v
        num = world.gap() if world.params.ttc_formula == "dx" else world.dy()
        if closing <= 0:
            return math.inf
        return num / closing

    def decide(self, world):
        p = world.params
        pov, sv = world.pov, world.sv
        mem = world.memory.get("h")
        if mem is None:
            mem = world.memory["h"] = {"phase": "brake" if pov.lane == p.lane_of(sv.y) else "approach"}
        if mem["phase"] == "brake":
            return p.brake, pov.lane
        if mem["phase"] == "cut":
            if abs(pov.y - p.lane_center(pov.lane)) < p.cut_in_tol:
                mem["phase"] = "brake"
                return p.brake, pov.lane
            return 0.0, pov.lane
        sv_lane = p.lane_of(sv.y)
        if sv_lane == pov.lane:
            # the SV moved into the POV lane: nothing left to cut into
            return 0.0, pov.lane
        step = 1 if sv_lane > pov.lane else -1
        if pov.lane + step != sv_lane:
            # first reach the lane next to the SV
            return 0.0, _lane_request(world, pov.lane + step)
        if world.gap() <= p.gap_accept:
            return p.a_max, pov.lane
        lo, hi = p.ttc_window
        if lo <= self.ttc(world) <= hi:
            if _lane_request(world, sv_lane) == sv_lane:
                mem["phase"] = "cut"
                return 0.0, sv_lane
            return 0.0, pov.lane
        return (-3.0 if pov.v > 0 else 0.0), pov.lane


class Predictive(Adversary):
    """Picks the (acceleration, lane) whose predicted position is closest to the
    SV's constant-velocity prediction."""

    name, label = "pi_p", "p"

    def decide(self, world):
        p = world.params
        sv, pov = world.sv, world.pov
        h = p.predict_horizon
        x0 = sv.x + sv.v * h
        y0 = sv.y
        lanes = [pov.lane]
        for lane in (pov.lane - 1, pov.lane + 1):
            if _lane_request(world, lane) == lane:
                lanes.append(lane)
        best, best_d = (0.0, pov.lane), math.inf
        for a in p.predict_accels:
            v_end = min(max(pov.v + a * h, 0.0), p.v_max)
            # distance covered under the clamped speed profile
            t_clamp = h if a == 0 else min(h, max(0.0, (v_end - pov.v) / a))
            x1 = pov.x + pov.v * t_clamp + 0.5 * a * t_clamp ** 2 + v_end * (h - t_clamp)
            dx = max(x1 - x0 - p.length, 0.0)
            for lane in lanes:
                d = math.hypot(dx, p.lane_center(lane) - y0)
                if d < best_d - 1e-12:
                    best, best_d = (a, lane), d
        return best


class Learned(Adversary):
    """Two-layer tanh network mapping normalized OSS coordinates to a desired
    speed (tracked with IDM) and a lateral mode (keep, left, right)."""

    name, label = "pi_e", "e"

    def __init__(self, theta, sizes=(4, 32, 4), norm=(50.0, 3.7, 25.0, 25.0)):
        self.sizes = tuple(int(s) for s in sizes)
        self.norm = np.asarray(norm, dtype=float)
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != n_params(self.sizes):
            raise ValueError(f"theta has {theta.size} entries, layers {self.sizes} need {n_params(self.sizes)}")
        self.theta = theta
        self.w1, self.b1, self.w2, self.b2 = unpack(theta, self.sizes)

    def forward(self, obs) -> np.ndarray:
        z = np.tanh(self.w1 @ (np.asarray(obs, dtype=float) / self.norm) + self.b1)
        return self.w2 @ z + self.b2

    def decide(self, world):
        p = world.params
        out = self.forward(world.project())
        v_des = p.v_max / (1.0 + math.exp(-out[0]))
        a = idm_accel(world.pov.v, None, math.inf, p, v_des=v_des)
        mode = int(np.argmax(out[1:4]))
        lane = world.pov.lane + (0, 1, -1)[mode]
        return a, _lane_request(world, lane)

    def to_json(self) -> dict:
        return {"sizes": list(self.sizes), "norm": self.norm.tolist(), "theta": self.theta.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Learned":
        return cls(doc["theta"], doc.get("sizes", (4, 32, 4)), doc.get("norm", (50.0, 3.7, 25.0, 25.0)))

    @classmethod
    def load(cls, path=None) -> "Learned":
        if path is None:
            text = resources.files("safeset.vehicle").joinpath("data/theta_e.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return cls.from_json(json.loads(text))


def n_params(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def unpack(theta, sizes):
    i, h, o = sizes
    w1 = theta[: i * h].reshape(h, i)
    b1 = theta[i * h: i * h + h]
    off = i * h + h
    w2 = theta[off: off + h * o].reshape(o, h)
    b2 = theta[off + h * o: off + h * o + o]
    return w1, b1, w2, b2


def make_adversary(label: str, theta_path=None) -> Adversary:
    if label == "s":
        return Steady()
    if label == "b":
        return BrakeToStop()
    if label == "h":
        return Hybrid()
    if label == "p":
        return Predictive()
    if label == "e":
        return Learned.load(theta_path)
    raise ValueError(f"unknown adversary {label!r}; choose from {LABELS}")
