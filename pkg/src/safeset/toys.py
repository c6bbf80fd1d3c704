"""Small analytic systems used by the CLI, the tests and the documentation."""

from __future__ import annotations

import numpy as np

from .core import ActionSampler, Dim, FunctionPolicy, MarkovSystem, OssSpec


def line(lo: float = 0.0, hi: float = 10.0, failure=None, name: str = "line") -> OssSpec:
    return OssSpec((Dim("s", lo, hi),), failure or (lambda s: False), name)


def identity_system(oss: OssSpec | None = None) -> MarkovSystem:
    oss = oss or line(name="identity")
    return MarkovSystem("identity", oss, lambda s, u, rng: s.copy())


def shift_system(lo: float = 0.0, hi: float = 10.0) -> MarkovSystem:
    """``s' = s + u`` with failure at the upper bound."""
    oss = line(lo, hi, lambda s: s[0] >= hi, "shift")
    return MarkovSystem("shift", oss, lambda s, u, rng: s + u[:1])


def drift_system(rate: float = 1.0) -> MarkovSystem:
    """``s' = s - rate`` on [0, 10]; failure below zero."""
    oss = line(0.0, 10.0, lambda s: s[0] < 0, "drift")
    return MarkovSystem("drift", oss, lambda s, u, rng: s - rate)


def _split(s: float) -> float:
    return 1.0 if s >= 5.0 else -1.0


def bistable_system() -> MarkovSystem:
    """Climbs to 10 from s >= 5, falls below zero (failure) otherwise."""
    oss = line(0.0, 10.0, lambda s: s[0] < 0, "bistable")
    return MarkovSystem("bistable", oss, lambda s, u, rng: np.minimum(s + _split(s[0]), 10.0))


def push_system() -> MarkovSystem:
    """Bistable drift against a testing push ``u``: ``s' = s + drift(s) - u``."""
    oss = line(0.0, 10.0, lambda s: s[0] < 0, "push")
    return MarkovSystem("push", oss, lambda s, u, rng: np.minimum(s + _split(s[0]) - u[:1], 10.0))


def zero_policy() -> FunctionPolicy:
    return FunctionPolicy("zero", lambda s: 0.0)


def constant_policy(value: float) -> FunctionPolicy:
    return FunctionPolicy(f"const{value:g}", lambda s: value)


def push_sampler(actions, name: str | None = None) -> ActionSampler:
    return ActionSampler(name or "U" + ",".join(f"{a:g}" for a in actions), list(actions), constant=True)


def bistable_safe_centroids(centroids) -> np.ndarray:
    """Analytic answer for the bistable toy: centroids that start the climb."""
    c = np.asarray(centroids, dtype=float).reshape(-1)
    return c[c >= 5.0]


TOYS = {
    "identity": identity_system,
    "shift": shift_system,
    "drift": drift_system,
    "bistable": bistable_system,
    "push": push_system,
}
