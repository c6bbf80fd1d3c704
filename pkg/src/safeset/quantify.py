"""Iterative quantification of an almost-safe set over a delta-covering.

The covering starts as the full grid over the operational state space.  Runs
start from surviving centroids; failure runs prune every centroid that can
reach the observed trajectory through the provenance graph, and clean runs
that leave the current covered region add provenance edges.  The procedure
stops after ``min_samples(eps, beta)`` consecutive clean runs that changed
nothing.

Graph vertices are states (rounded to nine digits); a vertex that coincides
with a centroid of the initial covering stands for that centroid.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import OssSpec, action_source, actor_label, derive_seed, execute_run
from .covering import CoveringSet, build_covering, centroid_key
from .stats import ConfidenceSpec

FORWARD = "forward"
BACKWARD = "backward"


class StateGraph:
    """Directed graph over hashable vertices with adjacency in both directions."""

    def __init__(self, vertices=()):
        self.vertices: set = set(vertices)
        self.succ: dict = {}
        self.pred: dict = {}
        self.edges: list = []

    def add_vertex(self, v) -> None:
        self.vertices.add(v)

    def add_edge(self, a, b) -> None:
        self.vertices.add(a)
        self.vertices.add(b)
        if b in self.succ.setdefault(a, set()):
            return
        self.succ[a].add(b)
        self.pred.setdefault(b, set()).add(a)
        self.edges.append((a, b))

    def __len__(self) -> int:
        return len(self.vertices)


def reachable(graph: StateGraph, s, direction: str = FORWARD) -> set:
    """Vertices connected to ``s`` directly or transitively (depth-first).

    ``direction="backward"`` follows edges against their orientation, giving
    every vertex from which ``s`` can be reached.
    """
    if s not in graph.vertices:
        return set()
    adj = graph.succ if direction == FORWARD else graph.pred
    seen = {s}
    stack = [s]
    while stack:
        v = stack.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


class ReplayBuffer:
    """FIFO buffer of states awaiting re-examination."""

    def __init__(self):
        self._q: deque = deque()

    def append(self, s) -> None:
        self._q.append(np.asarray(s, dtype=float))

    def pop(self) -> np.ndarray:
        return self._q.popleft()

    def __len__(self) -> int:
        return len(self._q)

    def __bool__(self) -> bool:
        return bool(self._q)


def norm_nearest_index(candidates, s, space: OssSpec) -> int:
    candidates = np.asarray(candidates, dtype=float)
    if len(candidates) == 0:
        raise ValueError("norm_nearest needs at least one candidate")
    d = np.sum(((candidates - np.asarray(s, dtype=float)) / space.span) ** 2, axis=1)
    return int(np.argmin(d))  # argmin keeps the first of equal minima


def norm_nearest(candidates, s, space: OssSpec) -> np.ndarray:
    """Candidate closest to ``s`` in range-normalized Euclidean distance."""
    return np.asarray(candidates, dtype=float)[norm_nearest_index(candidates, s, space)]


@dataclass
class QuantifyResult:
    cover: CoveringSet
    runs_total: int
    failure_runs: int
    pruned_centroids: int
    valid: bool
    spec: ConfidenceSpec
    seed: int
    actor: str = ""
    system: str = ""
    safe_graph: StateGraph = field(default_factory=StateGraph, repr=False)
    unsafe_graph: StateGraph = field(default_factory=StateGraph, repr=False)
    prune_log: list = field(default_factory=list, repr=False)
    audit: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "valid": self.valid,
            "n_centroids": len(self.cover),
            "runs_total": self.runs_total,
            "failure_runs": self.failure_runs,
            "pruned_centroids": self.pruned_centroids,
            "epsilon": self.spec.epsilon,
            "beta": self.spec.beta,
            "delta": self.cover.delta.tolist(),
            "seed": self.seed,
            "actor": self.actor,
            "system": self.system,
        }

    def save(self, out_dir, stem: str = "quantify") -> dict:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "summary": os.path.join(out_dir, f"{stem}.json"),
            "centroids": os.path.join(out_dir, f"{stem}_centroids.csv"),
            "audit": os.path.join(out_dir, f"{stem}_audit.jsonl"),
        }
        self.cover.to_csv(paths["centroids"])
        doc = self.summary()
        doc["centroids_csv"] = os.path.basename(paths["centroids"])
        with open(paths["summary"], "w") as fh:
            json.dump(doc, fh, indent=2)
        with open(paths["audit"], "w") as fh:
            for rec in self.audit:
                fh.write(json.dumps(rec) + "\n")
        return paths


def quantify(oss: OssSpec, system, actor, spec: ConfidenceSpec, delta, seed: int, max_runs: int,
             k: int = 1, prune_escapes: bool = True, initial: CoveringSet | None = None,
             audit: bool = True) -> QuantifyResult:
    """Quantify the almost-safe set of ``system`` under ``actor``.

    ``actor`` is a testing policy or, for the controlled variant, an action
    sampler drawing open-loop actions i.i.d. per run.

    With ``prune_escapes`` a clean run that leaves the current covered region
    also prunes every centroid leading to the escaping state through the
    provenance graph (its own start centroid included).  Without it the
    surviving set may keep centroids whose runs leave the covered region, and
    such a set fails re-validation.
    """
    n_target = spec.n
    if max_runs < n_target:
        raise ValueError(f"max_runs={max_runs} is below the required {n_target} clean runs")
    full = build_covering(oss, delta) if initial is None else initial
    if full.grid is None:
        raise ValueError("initial covering must be grid based")
    alive = np.zeros(full.grid.size, dtype=bool)
    alive[full.cells] = True
    n_alive = int(alive.sum())
    start = n_alive
    # graph vertices are states; centroid vertices map back to their grid cell
    cell_of = {centroid_key(c): int(cell) for c, cell in zip(full.centroids, full.cells)}

    g_s = StateGraph(cell_of)
    g_u = StateGraph()
    buf = ReplayBuffer()
    rng = np.random.default_rng(derive_seed(seed, 0, stream=5))
    prune_log: list = []
    log: list = []

    def in_cover(s) -> bool:
        return any(alive[c] for c in full.grid_cells(s))

    def prune_from(s, why: str) -> int:
        nonlocal n_alive
        removed = 0
        for v in reachable(g_s, centroid_key(s), BACKWARD):
            cell = cell_of.get(v)
            if cell is not None and alive[cell]:
                alive[cell] = False
                removed += 1
                prune_log.append({"centroid": list(v), "via": [float(x) for x in s], "why": why})
        n_alive -= removed
        return removed

    counter = 0
    runs = 0
    failures = 0
    while counter < n_target:
        if n_alive == 0 or runs >= max_runs:
            break
        alive_cells = np.flatnonzero(alive)
        if not buf:
            cell0 = int(alive_cells[rng.integers(len(alive_cells))])
            source = "uniform"
        else:
            sb = buf.pop()
            cents = np.array([full.grid.centroid(int(c)) for c in alive_cells])
            cell0 = int(alive_cells[norm_nearest_index(cents, sb, oss)])
            source = "buffer"
        s0 = full.grid.centroid(cell0)
        run_seed = derive_seed(seed, runs, stream=6)
        run = execute_run(system, action_source(actor, k, run_seed), s0, k, run_seed)
        runs += 1
        removed = 0
        if run.hit_failure:
            failures += 1
            tau = run.prefix()
            for i in range(len(tau) - 1):
                buf.append(tau[i])
                removed += prune_from(tau[i], "failure")
                g_u.add_edge(centroid_key(tau[i]), centroid_key(tau[i + 1]))
            buf.append(tau[-1])
            counter = 0
        else:
            tau = run.trajectory()
            before = n_alive
            prev = centroid_key(s0)
            escapes = []
            for i in range(1, len(tau)):
                if not in_cover(tau[i]):
                    key = centroid_key(tau[i])
                    g_s.add_edge(prev, key)
                    prev = key
                    escapes.append(tau[i])
            if prune_escapes:
                for x in escapes:
                    removed += prune_from(x, "escape")
            if before == n_alive and not buf:
                counter += 1
            else:
                counter = 0
        if audit:
            log.append({"run": runs - 1, "s0": s0.tolist(), "source": source,
                        "outcome": "failure" if run.hit_failure else "clean", "pruned": removed,
                        "alive": n_alive, "buffer": len(buf), "counter": counter})

    valid = counter >= n_target or n_alive == 0
    cover = full.with_cells(np.flatnonzero(alive))
    return QuantifyResult(cover, runs, failures, start - n_alive, valid, spec, int(seed),
                          actor_label(actor), getattr(system, "name", ""), g_s, g_u, prune_log, log)


class ProductSystem:
    """Wraps a system so a constant testing action becomes part of the state.

    The product space is the state space followed by the action dimensions;
    runs keep the action coordinates fixed and feed them to the inner system.
    """

    def __init__(self, inner, action_dims):
        self.inner = inner
        self.nx = inner.oss.ndim
        dims = tuple(inner.oss.dims) + tuple(action_dims)
        nx = self.nx
        self.oss = OssSpec(dims, lambda z: inner.oss.is_failure(np.asarray(z)[:nx]), f"{inner.oss.name}*U")
        self.name = f"{inner.name}*U"

    def reset(self, z0, seed):
        z0 = np.asarray(z0, dtype=float)
        return [self.inner.reset(z0[: self.nx], seed), z0[self.nx:].copy()]

    def step(self, sim, action=None):
        sim[0] = self.inner.step(sim[0], sim[1])
        return sim

    def observe(self, sim):
        return np.concatenate([np.asarray(self.inner.observe(sim[0]), dtype=float), sim[1]])


class HoldAction:
    """Placeholder policy for product systems (the action lives in the state)."""

    name = "product-state-action"

    def act(self, state, sim=None):
        return np.zeros(1)
