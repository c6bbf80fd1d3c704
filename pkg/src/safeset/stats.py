"""Sample-size arithmetic and statistical validation of almost-safe sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import RunRecord, action_source, actor_label, derive_seed, execute_run
from .covering import CoveringSet

POLICY_MODE = "policy"
CONTROLLED_MODE = "controlled"


@dataclass(frozen=True)
class ConfidenceSpec:
    epsilon: float
    beta: float

    def __post_init__(self):
        for name in ("epsilon", "beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0) or math.isnan(v):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def n(self) -> int:
        return min_samples(self.epsilon, self.beta)


def _check_open_unit(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {v}")
    return v


def min_samples(epsilon: float, beta: float) -> int:
    """Smallest N with (1 - epsilon)**N <= beta."""
    epsilon = _check_open_unit("epsilon", epsilon)
    beta = _check_open_unit("beta", beta)
    x = math.log(beta) / math.log1p(-epsilon)
    n = math.ceil(x)
    # ratios that land a hair above an integer are rounding noise
    if n - x > 1.0 - 1e-10 * max(1.0, x):
        n -= 1
    return max(int(n), 1)


def epsilon_from_samples(m: int, beta: float) -> float:
    """Escape probability bound certified by ``m`` clean runs at confidence ``1 - beta``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    beta = _check_open_unit("beta", beta)
    return -math.expm1(math.log(beta) / m)


class MassFunction:
    """Non-negative weight over states; uniform unless ``weight`` is given."""

    def __init__(self, weight: Callable[[np.ndarray], float] | None = None, name: str = "uniform"):
        self.weight = weight
        self.name = name if weight is None or name != "uniform" else "custom"

    def weights(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if self.weight is None:
            return np.ones(len(states))
        w = np.array([float(self.weight(s)) for s in states])
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise ValueError("mass function must be finite and non-negative")
        return w

    def probabilities(self, states) -> np.ndarray:
        w = self.weights(states)
        total = w.sum()
        if len(w) and not total > 0:
            raise ValueError("mass function has zero total mass on this set")
        return w / total if len(w) else w


UNIFORM = MassFunction()


def sample_centroids(cover: CoveringSet, n: int, rng: np.random.Generator,
                     mass: MassFunction | None = None) -> np.ndarray:
    """Indices of ``n`` centroids drawn i.i.d. from the renormalized mass."""
    if len(cover) == 0:
        raise ValueError("cannot sample from an empty cover")
    p = (mass or UNIFORM).probabilities(cover.centroids)
    return rng.choice(len(cover), size=n, p=p)


@dataclass
class SafeSetCertificate:
    cover: CoveringSet
    spec: ConfidenceSpec
    actor: str
    system: str
    runs_used: int
    mode: str
    seed: int
    k: int
    cover_csv: str | None = None

    def to_json(self) -> dict:
        return {
            "epsilon": self.spec.epsilon,
            "beta": self.spec.beta,
            "delta": self.cover.delta.tolist(),
            "n_centroids": len(self.cover),
            "actor": self.actor,
            "system": self.system,
            "runs_used": self.runs_used,
            "mode": self.mode,
            "seed": self.seed,
            "k": self.k,
            "cover_csv": self.cover_csv,
        }

    def save(self, path, cover_csv=None) -> None:
        if cover_csv is not None:
            self.cover.to_csv(cover_csv)
            self.cover_csv = str(cover_csv)
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


@dataclass
class Falsified:
    run: RunRecord
    run_index: int
    reason: str
    # first recorded step that left the cover (None for failure runs)
    step: int | None = None
    runs_used: int = field(default=0)

    def to_json(self) -> dict:
        return {"falsified": True, "reason": self.reason, "run_index": self.run_index,
                "step": self.step, "run": self.run.to_json()}


def check_disjoint(cover: CoveringSet) -> None:
    for c in cover.centroids:
        if cover.space.is_failure(c):
            raise ValueError(f"candidate centroid {c.tolist()} lies in the failure set")


def first_escape(cover: CoveringSet, run: RunRecord) -> int | None:
    for t, s in enumerate(run.states):
        if not cover.contains(s):
            return t
    return None


def validate_safe_set(candidate: CoveringSet, actor, system, spec: ConfidenceSpec, k: int, seed: int,
                      mass: MassFunction | None = None) -> SafeSetCertificate | Falsified:
    """Statistically validate ``candidate`` as an almost-safe set.

    ``actor`` is a policy (closed-loop mode) or an action sampler (controlled
    mode).  Runs start at centroids drawn from ``mass``; the first run that
    fails or leaves the covered region falsifies the candidate.
    """
    check_disjoint(candidate)
    n = spec.n
    mode = POLICY_MODE if hasattr(actor, "act") else CONTROLLED_MODE
    rng = np.random.default_rng(derive_seed(seed, 0, stream=3))
    if len(candidate):
        picks = sample_centroids(candidate, n, rng, mass)
    for i in range(n if len(candidate) else 0):
        s0 = candidate.centroids[picks[i]]
        run_seed = derive_seed(seed, i, stream=4)
        run = execute_run(system, action_source(actor, k, run_seed), s0, k, run_seed)
        if run.hit_failure:
            return Falsified(run, i, "failure", None, i + 1)
        t = first_escape(candidate, run)
        if t is not None:
            return Falsified(run, i, "escape", t, i + 1)
    return SafeSetCertificate(candidate, spec, actor_label(actor), getattr(system, "name", ""), n, mode,
                              int(seed), int(k))
