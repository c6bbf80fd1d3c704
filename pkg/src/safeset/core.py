"""Testing-system engine: state spaces, run execution, costs and algorithm loops.

A *run* is the recorded length-``k`` trajectory produced by stepping a black-box
system from an initial state under either a fixed action sequence (open-loop
testing) or a feedback testing policy.  Two recording rules apply:

* absorb: once a recorded state is a failure state, every later recorded state
  is that same failure state;
* freeze: while the underlying state is outside the operational state space
  (and not a failure), the recorded state is held at the last in-space state.
  The simulation itself keeps evolving and recording resumes on re-entry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Protocol, Sequence

import numpy as np

CONTINUOUS = "continuous"
INTEGER = "integer"

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int, stream: int = 0) -> int:
    """Counter-based child seed; independent of evaluation order."""
    return splitmix64(splitmix64((master & _MASK64) ^ (stream * 0xD1B54A32D192ED03 & _MASK64)) + index)


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    unit: str = ""
    kind: str = CONTINUOUS

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, INTEGER):
            raise ValueError(f"unknown dimension kind {self.kind!r}")
        if self.kind == CONTINUOUS and not self.lower < self.upper:
            raise ValueError(f"dimension {self.name}: need lower < upper")
        if self.kind == INTEGER and not self.lower <= self.upper:
            raise ValueError(f"dimension {self.name}: need lower <= upper")


def _never(state: np.ndarray) -> bool:
    return False


@dataclass(frozen=True)
class OssSpec:
    """Bounded operational state space plus its failure predicate."""

    dims: tuple[Dim, ...]
    failure: Callable[[np.ndarray], bool] = _never
    name: str = "oss"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims], dtype=float)

    @property
    def span(self) -> np.ndarray:
        span = self.upper - self.lower
        return np.where(span > 0, span, 1.0)

    def check(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if state.shape != (self.ndim,):
            raise ValueError(f"state has shape {state.shape}, expected ({self.ndim},)")
        for i, d in enumerate(self.dims):
            if d.kind == INTEGER and state[i] != round(state[i]):
                raise ValueError(f"dimension {d.name} must hold an integer, got {state[i]}")
        return state

    def contains(self, state: np.ndarray) -> bool:
        for i, d in enumerate(self.dims):
            if not d.lower <= state[i] <= d.upper:
                return False
        return True

    def is_failure(self, state: np.ndarray) -> bool:
        return bool(self.failure(state))

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        out = np.empty(self.ndim)
        for i, d in enumerate(self.dims):
            if d.kind == INTEGER:
                out[i] = rng.integers(int(d.lower), int(d.upper) + 1)
            else:
                out[i] = rng.uniform(d.lower, d.upper)
        return out


class SystemModel(Protocol):
    """Black-box testing system.

    ``reset`` builds the simulation handle for one run (any per-run randomness
    must come from ``seed``), ``step`` advances it by one testing action and
    ``observe`` projects it onto the operational state space.
    """

    name: str
    oss: OssSpec

    def reset(self, s0: np.ndarray, seed: int) -> Any: ...

    def step(self, sim: Any, action: np.ndarray) -> Any: ...

    def observe(self, sim: Any) -> np.ndarray: ...


class PolicyModel(Protocol):
    name: str

    def act(self, state: np.ndarray, sim: Any) -> np.ndarray: ...


class MarkovSystem:
    """System whose next state is ``fn(state, action, rng)``."""

    def __init__(self, name: str, oss: OssSpec, fn: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]):
        self.name = name
        self.oss = oss
        self.fn = fn

    def reset(self, s0, seed):
        return [np.array(s0, dtype=float), np.random.default_rng(seed)]

    def step(self, sim, action):
        sim[0] = np.asarray(self.fn(sim[0], action, sim[1]), dtype=float)
        return sim

    def observe(self, sim):
        return sim[0]


class FunctionPolicy:
    def __init__(self, name: str, fn: Callable[[np.ndarray], Any]):
        self.name = name
        self.fn = fn

    def act(self, state, sim=None):
        return np.atleast_1d(np.asarray(self.fn(state), dtype=float))

    def __repr__(self):
        return f"FunctionPolicy({self.name!r})"


@dataclass
class RunRecord:
    s0: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    seed: int
    hit_failure: bool
    left_oss_steps: list[int] = field(default_factory=list)
    first_failure: int | None = None
    # recorded tail is frozen because the simulation never re-entered the space
    frozen_tail: bool = False

    @property
    def k(self) -> int:
        return len(self.states)

    def trajectory(self) -> np.ndarray:
        """Initial state followed by the recorded states."""
        return np.vstack([self.s0[None, :], self.states])

    def prefix(self) -> np.ndarray:
        """Trajectory cut after the first failure state (whole trajectory if none)."""
        traj = self.trajectory()
        if self.first_failure is None:
            return traj
        return traj[: self.first_failure + 2]

    def to_json(self) -> dict:
        return {
            "s0": self.s0.tolist(),
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
            "seed": int(self.seed),
            "hit_failure": bool(self.hit_failure),
            "left_oss_steps": list(self.left_oss_steps),
            "frozen_tail": bool(self.frozen_tail),
            "first_failure": self.first_failure,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RunRecord":
        states = np.asarray(doc["states"], dtype=float)
        actions = np.asarray(doc["actions"], dtype=float)
        rec = cls(
            s0=np.asarray(doc["s0"], dtype=float),
            states=states.reshape(len(states), -1),
            actions=actions.reshape(len(actions), -1),
            seed=int(doc["seed"]),
            hit_failure=bool(doc["hit_failure"]),
            left_oss_steps=list(doc.get("left_oss_steps", [])),
            frozen_tail=bool(doc.get("frozen_tail", False)),
            first_failure=doc.get("first_failure"),
        )
        return rec

    def fingerprint(self, cost: Any = None) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.states).tobytes())
        h.update(np.ascontiguousarray(self.actions).tobytes())
        h.update(json.dumps(_jsonable(cost), sort_keys=True).encode())
        return h.hexdigest()


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_runs_jsonl(path, runs: Iterable[RunRecord]) -> None:
    with open(path, "w") as fh:
        for run in runs:
            fh.write(json.dumps(run.to_json()) + "\n")


def read_runs_jsonl(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def execute_run(system: SystemModel, action_source, s0, k: int, seed: int) -> RunRecord:
    """Simulate one run of ``k`` steps from ``s0``.

    ``action_source`` is either a policy (anything with ``act``) or an
    open-loop action sequence with exactly ``k`` entries.
    """
    oss = system.oss
    s0 = oss.check(s0)
    if k < 1:
        raise ValueError("horizon k must be >= 1")
    if oss.is_failure(s0):
        raise ValueError("initial state lies in the failure set")
    if not oss.contains(s0):
        raise ValueError("initial state lies outside the operational state space")

    policy = action_source if hasattr(action_source, "act") else None
    if policy is None:
        seq = np.asarray(action_source, dtype=float)
        if seq.ndim == 1:
            seq = seq[:, None]
        if len(seq) != k:
            raise ValueError(f"open-loop action sequence has {len(seq)} entries, expected k={k}")

    sim = system.reset(s0, seed)
    last = s0
    states = []
    actions = []
    left = []
    first_failure = None
    outside = False
    for t in range(k):
        if first_failure is not None:
            states.append(last)
            actions.append(actions[-1] if policy is not None else seq[t])
            continue
        if policy is not None:
            u = np.atleast_1d(np.asarray(policy.act(last, sim), dtype=float))
        else:
            u = seq[t]
        actions.append(u)
        sim = system.step(sim, u)
        raw = np.asarray(system.observe(sim), dtype=float)
        if oss.is_failure(raw):
            first_failure = t
            last = raw.copy()
            states.append(last)
            outside = False
        elif oss.contains(raw):
            last = raw.copy()
            states.append(last)
            outside = False
        else:
            left.append(t)
            states.append(last)
            outside = True
    return RunRecord(
        s0=s0,
        states=np.array(states, dtype=float).reshape(k, oss.ndim),
        actions=np.array(actions, dtype=float).reshape(k, -1),
        seed=int(seed),
        hit_failure=first_failure is not None,
        left_oss_steps=left,
        first_failure=first_failure,
        frozen_tail=outside,
    )


def failure_cost(run: RunRecord) -> bool:
    return bool(run.hit_failure)


def run_identity_cost(run: RunRecord) -> tuple:
    """Cost that is the recorded run itself."""
    return tuple(map(tuple, run.states.tolist()))


def first_failure_rule(costs: Sequence) -> bool:
    return any(bool(c) for c in costs)


def always(costs: Sequence) -> bool:
    return True


OPEN_LOOP = "open-loop"
POLICY = "policy"


@dataclass
class AlgorithmSpec:
    """One scenario-based testing algorithm.

    ``sampler(costs, rng)`` proposes the next run: it returns ``(s0, actions)``
    for open-loop algorithms and ``(s0, None)`` for policy-driven ones.  A
    sampler may raise ``StopIteration`` when it has nothing left to propose.
    """

    kind: str
    sampler: Callable[[Sequence, np.random.Generator], tuple]
    cost: Callable[[RunRecord], Hashable] = failure_cost
    termination: Callable[[Sequence], bool] = first_failure_rule
    k: int = 1
    policy: PolicyModel | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in (OPEN_LOOP, POLICY):
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        if (self.kind == POLICY) != (self.policy is not None):
            raise ValueError("policy-driven algorithms need a policy; open-loop ones must not have one")

    def descriptor(self) -> tuple:
        return (self.kind, self.label, getattr(self.policy, "name", None))


@dataclass
class AlgorithmResult:
    costs: list
    runs: list[RunRecord]
    terminated: bool
    duplicates: int = 0


def run_algorithm(spec: AlgorithmSpec, system: SystemModel, max_runs: int, seed: int,
                  max_attempts: int | None = None) -> AlgorithmResult:
    """Iterate runs until the termination rule fires or ``max_runs`` is reached.

    Duplicate samples (same states, actions and cost) are discarded and do not
    count as runs.
    """
    if max_runs < 1:
        raise ValueError("max_runs must be >= 1")
    if max_attempts is None:
        max_attempts = 100 * max_runs
    rng = np.random.default_rng(derive_seed(seed, 0, stream=1))
    costs: list = []
    runs: list[RunRecord] = []
    seen: set[str] = set()
    duplicates = 0
    for attempt in range(max_attempts):
        try:
            s0, seq = spec.sampler(costs, rng)
        except StopIteration:
            break
        source = spec.policy if spec.kind == POLICY else seq
        run = execute_run(system, source, s0, spec.k, derive_seed(seed, attempt))
        cost = spec.cost(run)
        key = run.fingerprint(cost)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        runs.append(run)
        costs.append(cost)
        if spec.termination(costs):
            return AlgorithmResult(costs, runs, True, duplicates)
        if len(runs) >= max_runs:
            break
    return AlgorithmResult(costs, runs, False, duplicates)


def order_sampler(pairs: Sequence[tuple]) -> Callable:
    """Brute-force sampler walking a fixed list of ``(s0, actions)`` pairs."""
    it = iter(list(pairs))

    def sample(costs, rng):
        s0, seq = next(it)
        return np.asarray(s0, dtype=float), (None if seq is None else np.asarray(seq, dtype=float))

    return sample


class ActionSampler:
    """Open-loop source drawing actions i.i.d. from a finite admissible set.

    With ``constant=True`` one action is drawn per run and held for all ``k``
    steps; otherwise every step draws afresh.
    """

    def __init__(self, name: str, actions, constant: bool = False):
        self.name = name
        self.actions = np.asarray(actions, dtype=float)
        if self.actions.ndim == 1:
            self.actions = self.actions[:, None]
        if len(self.actions) == 0:
            raise ValueError("empty action set")
        self.constant = constant

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.constant:
            return np.repeat(self.actions[rng.integers(len(self.actions))][None, :], k, axis=0)
        return self.actions[rng.integers(len(self.actions), size=k)]

    def __repr__(self):
        return f"ActionSampler({self.name!r}, {len(self.actions)} actions)"


def actor_label(actor) -> str:
    return getattr(actor, "name", type(actor).__name__)


def action_source(actor, k: int, seed: int):
    """Policy as-is, or a fresh open-loop sequence drawn for one run."""
    if hasattr(actor, "act"):
        return actor
    if hasattr(actor, "sample"):
        return actor.sample(k, np.random.default_rng(derive_seed(seed, 0, stream=7)))
    raise TypeError(f"{actor!r} is neither a policy nor an action sampler")
