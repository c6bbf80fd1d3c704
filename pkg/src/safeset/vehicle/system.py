"""The lead-vehicle-following testbed as a black-box testing system."""

from __future__ import annotations

import numpy as np

from ..core import Dim, OssSpec, derive_seed, execute_run
from .world import VehicleParams, VehicleWorld, init_world, subject_act, world_step

SUBJECTS = ("a", "c", "mix")
DEFAULT_K = 100


def vehicle_failure(s) -> bool:
    dx, dy = float(s[0]), float(s[1])
    return -10.0 < dx <= 0.0 and abs(dy) <= 1.0


def vehicle_oss(params: VehicleParams | None = None) -> OssSpec:
    p = params or VehicleParams()
    w = p.lane_width
    pred = _failure_for(p)
    return OssSpec(
        (
            Dim("d_x", 0.0, p.dx_cap, "m"),
            Dim("d_y", -w, w, "m"),
            Dim("v0", 0.0, p.v_max, "m/s"),
            Dim("v1", 0.0, p.v_max, "m/s"),
        ),
        pred,
        "vehicle",
    )


def _failure_for(p: VehicleParams):
    if p == VehicleParams():
        return vehicle_failure

    def pred(s) -> bool:
        return -2 * p.length < float(s[0]) <= 0.0 and abs(float(s[1])) <= p.width / 2
    return pred


class VehicleSystem:
    """SV plus road; the testing action is the POV's ``(acceleration, lane)``.

    ``subject`` selects the SV policy: ``c`` (IDM), ``a`` (IDM + MOBIL) or
    ``mix`` (one of the two drawn uniformly per run from the run seed).
    """

    def __init__(self, subject: str = "mix", params: VehicleParams | None = None):
        if subject not in SUBJECTS:
            raise ValueError(f"subject must be one of {SUBJECTS}")
        self.subject = subject
        self.params = params or VehicleParams()
        self.oss = vehicle_oss(self.params)
        self.name = f"vehicle-{subject}"

    def pick_subject(self, seed: int) -> str:
        if self.subject != "mix":
            return self.subject
        return "ac"[int(np.random.default_rng(seed).integers(2))]

    def reset(self, s0, seed) -> VehicleWorld:
        every = max(1, int(round(self.params.mobil_period / self.params.dt)))
        phase = int(np.random.default_rng(derive_seed(seed, 0, stream=21)).integers(every))
        return init_world(s0, self.params, self.pick_subject(seed), phase)

    def step(self, world: VehicleWorld, action) -> VehicleWorld:
        a0, lane0 = subject_act(world)
        a1, lane1 = float(action[0]), int(round(float(action[1])))
        return world_step(world, a0, lane0, a1, lane1)

    def observe(self, world: VehicleWorld) -> np.ndarray:
        return world.project()


def uniform_inits(oss: OssSpec, n: int, seed: int) -> np.ndarray:
    """``n`` initial states drawn uniformly from the OSS outside the failure set."""
    rng = np.random.default_rng(derive_seed(seed, 0, stream=22))
    out = []
    while len(out) < n:
        s = oss.sample_uniform(rng)
        if not oss.is_failure(s):
            out.append(s)
    return np.array(out)


def failure_rate(system: VehicleSystem, actor, inits, seed: int, k: int = DEFAULT_K) -> float:
    """Fraction of runs from ``inits`` that reach the failure set within ``k`` steps."""
    hits = 0
    for i, s0 in enumerate(inits):
        hits += execute_run(system, actor, s0, k, derive_seed(seed, i, stream=23)).hit_failure
    return hits / len(inits)
