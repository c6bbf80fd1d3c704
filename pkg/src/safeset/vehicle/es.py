"""Evolution-strategy training of the learned POV policy.

Antithetic Gaussian perturbations with centred-rank fitness shaping.  Every
candidate is scored on the same fixed set of episodes, so rewards are
comparable across iterations and the best-so-far parameters are well defined.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import derive_seed, execute_run
from .adversaries import Learned, n_params
from .system import VehicleSystem
from .world import VehicleParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EsParams:
    population: int = 32
    iterations: int = 200
    sigma: float = 0.1
    lr: float = 0.05
    episodes: int = 16
    horizon: int = 60
    init_scale: float = 0.1
    sizes: tuple = (4, 32, 4)

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be an even number >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        for name in ("sigma", "lr", "episodes", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RewardSpec:
    collision_bonus: float = 100.0
    # per-step penalty on the capped headway, rewarding short distances
    distance_weight: float = 0.01


def episode_reward(run, spec: RewardSpec) -> float:
    r = spec.collision_bonus if run.hit_failure else 0.0
    return r - spec.distance_weight * float(np.sum(np.maximum(run.states[:, 0], 0.0)))


@dataclass
class EsResult:
    theta: np.ndarray
    best_reward: float
    initial_reward: float
    curve: list = field(default_factory=list)

    def policy(self, sizes=(4, 32, 4)) -> Learned:
        return Learned(self.theta, sizes)


def evaluation_set(system: VehicleSystem, n: int, seed: int) -> list[tuple[np.ndarray, int]]:
    rng = np.random.default_rng(derive_seed(seed, 0, stream=11))
    out = []
    oss = system.oss
    while len(out) < n:
        s0 = oss.sample_uniform(rng)
        if oss.is_failure(s0):
            continue
        out.append((s0, derive_seed(seed, len(out), stream=12)))
    return out


def es_train(reward_spec: RewardSpec | Callable | None = None, es_params: EsParams | None = None, seed: int = 0,
             subject: str = "c", params: VehicleParams | None = None) -> EsResult:
    """Train the learned-policy parameters; returns the best mean-reward theta."""
    es = es_params or EsParams()
    reward_spec = reward_spec or RewardSpec()
    reward = reward_spec if callable(reward_spec) else (lambda run: episode_reward(run, reward_spec))
    system = VehicleSystem(subject, params)
    episodes = evaluation_set(system, es.episodes, seed)
    dim = n_params(es.sizes)
    rng = np.random.default_rng(derive_seed(seed, 0, stream=13))
    theta = rng.normal(0.0, es.init_scale, dim)

    def score(th: np.ndarray) -> float:
        pol = Learned(th, es.sizes)
        return float(np.mean([reward(execute_run(system, pol, s0, es.horizon, sd)) for s0, sd in episodes]))

    best = theta.copy()
    best_r = initial = score(theta)
    curve = [{"iteration": 0, "mean": best_r, "best": best_r}]
    half = es.population // 2
    for it in range(1, es.iterations + 1):
        eps = rng.normal(0.0, 1.0, (half, dim))
        r_pos = np.array([score(theta + es.sigma * e) for e in eps])
        r_neg = np.array([score(theta - es.sigma * e) for e in eps])
        ranks = np.concatenate([r_pos, r_neg]).argsort().argsort()
        shaped = ranks / (2 * half - 1) - 0.5
        grad = (shaped[:half] - shaped[half:]) @ eps / (2 * half * es.sigma)
        theta = theta + es.lr * grad
        r = score(theta)
        cand = [(r, theta)] + [(r_pos[i], theta - es.lr * grad + es.sigma * eps[i]) for i in range(half)]
        for rv, th in cand:
            if rv > best_r:
                best_r, best = float(rv), th.copy()
        curve.append({"iteration": it, "mean": r, "best": best_r})
        log.info("es iteration %d: mean %.3f best %.3f", it, r, best_r)
    return EsResult(best, best_r, initial, curve)


def save_theta(path, theta, sizes=(4, 32, 4), norm=(50.0, 3.7, 25.0, 25.0), meta: dict | None = None) -> None:
    doc = {"sizes": list(sizes), "norm": list(norm), "theta": [float(x) for x in theta]}
    if meta:
        doc["meta"] = meta
    with open(path, "w") as fh:
        json.dump(doc, fh)
