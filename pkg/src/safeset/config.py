"""Experiment configuration: one YAML file per experiment.

Top-level keys::

    testbed: toy | vehicle | nfl
    seed: 0                 # master seed (overridable on the command line)
    out: results            # output directory
    epsilon: 0.01
    beta: 0.0001
    delta: [0.5]
    k: 12                   # run horizon in steps
    max_runs: 100000
    prune_escapes: true

    toy:                    # testbed: toy
      system: bistable      # identity | shift | drift | bistable | push
      actor: {policy: zero} # or {const: 1.0} or {actions: [0, 0.5]} (constant per run)
      te2: {const: 0.5}     # second tester for compare

    vehicle:                # testbed: vehicle
      subject: mix          # a | c | mix
      adversary: b          # s | b | h | p | e
      te2: s
      theta: null           # path to learned-policy parameters
      params: {}            # overrides of VehicleParams fields

    validate: {candidate: cover.csv}
    compare: {matrix: false, adversaries: [s, b, h, p, e]}
    nfl: {n_states: 2, n_actions: 2, k: 1, m: 2, cost: failure, orders: random, workers: 1}
    report: {artifacts: results, runs: 1000, subjects: [a, c], v0: 5, v1: 20}
    es: {iterations: 150, population: 32, episodes: 16, horizon: 100, reward: {collision_bonus: 100}}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .stats import ConfidenceSpec
from .toys import TOYS, constant_policy, push_sampler, zero_policy
from .vehicle import LABELS, VehicleParams, VehicleSystem, make_adversary
from .vehicle.system import SUBJECTS

TESTBEDS = ("toy", "vehicle", "nfl")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    testbed: str
    seed: int = 0
    out: str = "results"
    epsilon: float = 0.01
    beta: float = 1e-4
    delta: list | None = None
    k: int | None = None
    max_runs: int = 100_000
    prune_escapes: bool = True
    toy: dict = field(default_factory=dict)
    vehicle: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    nfl: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    es: dict = field(default_factory=dict)

    @property
    def spec(self) -> ConfidenceSpec:
        return ConfidenceSpec(self.epsilon, self.beta)

    # testbed construction -------------------------------------------------

    def system(self):
        if self.testbed == "toy":
            return TOYS[self.toy.get("system", "identity")]()
        if self.testbed == "vehicle":
            return VehicleSystem(self.vehicle.get("subject", "mix"), self.vehicle_params())
        raise ConfigError(f"testbed {self.testbed!r} has no simulated system")

    def vehicle_params(self) -> VehicleParams:
        return VehicleParams.from_dict(self.vehicle.get("params"))

    def actor(self, which: str = "actor"):
        if self.testbed == "toy":
            key = "actor" if which == "actor" else which
            return toy_actor(self.toy.get(key, {"policy": "zero"}))
        key = "adversary" if which == "actor" else which
        return make_adversary(self.vehicle.get(key, "b"), self.vehicle.get("theta"))

    def horizon(self) -> int:
        if self.k is not None:
            return int(self.k)
        return 100 if self.testbed == "vehicle" else 12


def toy_actor(doc):
    if isinstance(doc, (int, float)):
        return constant_policy(float(doc))
    if not isinstance(doc, dict) or len(doc) == 0:
        raise ConfigError(f"bad toy actor {doc!r}")
    if "actions" in doc:
        return push_sampler(doc["actions"], doc.get("name"))
    if "const" in doc:
        return constant_policy(float(doc["const"]))
    if doc.get("policy") == "zero":
        return zero_policy()
    raise ConfigError(f"bad toy actor {doc!r}")


def load_config(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    known = set(ExperimentConfig.__dataclass_fields__)
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    if "testbed" not in doc:
        raise ConfigError("config needs a 'testbed'")
    try:
        cfg = ExperimentConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    check_config(cfg)
    return cfg


def check_config(cfg: ExperimentConfig) -> None:
    """Reject every downstream precondition violation before simulating."""
    if cfg.testbed not in TESTBEDS:
        raise ConfigError(f"testbed must be one of {TESTBEDS}")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if cfg.testbed == "nfl":
        n = cfg.nfl
        for key in ("n_states", "n_actions", "k"):
            if int(n.get(key, 1)) < 1:
                raise ConfigError(f"nfl.{key} must be >= 1")
        if n.get("cost", "failure") not in ("failure", "identity"):
            raise ConfigError("nfl.cost must be 'failure' or 'identity'")
        if int(n.get("m", 1)) < 0:
            raise ConfigError("nfl.m must be >= 0")
        return
    for name in ("epsilon", "beta"):
        v = getattr(cfg, name)
        if not isinstance(v, (int, float)) or not 0 < v < 1:
            raise ConfigError(f"{name} must lie strictly between 0 and 1")
    if cfg.horizon() < 1:
        raise ConfigError("k must be >= 1")
    if cfg.max_runs < cfg.spec.n:
        raise ConfigError(f"max_runs must be at least {cfg.spec.n}")
    if cfg.testbed == "toy":
        if cfg.toy.get("system", "identity") not in TOYS:
            raise ConfigError(f"toy.system must be one of {sorted(TOYS)}")
        for key in ("actor", "te2"):
            if key in cfg.toy:
                toy_actor(cfg.toy[key])
    else:
        if cfg.vehicle.get("subject", "mix") not in SUBJECTS:
            raise ConfigError(f"vehicle.subject must be one of {SUBJECTS}")
        for key in ("adversary", "te2"):
            if key in cfg.vehicle and cfg.vehicle[key] not in LABELS:
                raise ConfigError(f"vehicle.{key} must be one of {LABELS}")
        for lab in cfg.compare.get("adversaries", []):
            if lab not in LABELS:
                raise ConfigError(f"compare.adversaries entries must be in {LABELS}")
        try:
            cfg.vehicle_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    ndim = cfg.system().oss.ndim
    if cfg.delta is None:
        cfg.delta = [5.0, 3.7, 5.0, 5.0] if cfg.testbed == "vehicle" else [0.5] * ndim
    delta = np.asarray(cfg.delta, dtype=float)
    if delta.shape != (ndim,) or np.any(delta <= 0):
        raise ConfigError(f"delta must hold {ndim} positive entries")
