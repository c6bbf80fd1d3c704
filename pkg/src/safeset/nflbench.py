"""Exhaustive no-free-lunch bench on tiny deterministic systems.

Every transition table ``f: O x U -> O`` is enumerated and an exploration
order (a fixed permutation of initial-state/action-sequence pairs) is run
against each one.  Tallying the resulting cost sequences over all tables gives
the exact distribution that two exploration orders are compared on.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

DEFAULT_CAP = 10**7


@dataclass(frozen=True)
class SystemTable:
    n_states: int
    n_actions: int
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != self.n_states * self.n_actions:
            raise ValueError("table must list one successor per (state, action)")
        if any(not 0 <= x < self.n_states for x in self.table):
            raise ValueError("successor outside the state set")

    def __call__(self, s: int, u: int) -> int:
        return self.table[s * self.n_actions + u]


def n_systems(n_states: int, n_actions: int) -> int:
    return n_states ** (n_states * n_actions)


def _check_cap(n_states: int, n_actions: int, cap: int) -> int:
    if n_states < 1 or n_actions < 1:
        raise ValueError("need at least one state and one action")
    total = n_systems(n_states, n_actions)
    if total > cap:
        raise ValueError(f"{total} systems exceed the enumeration cap {cap}")
    return total


def _tables(n_states: int, n_actions: int, start: int = 0, stop: int | None = None) -> Iterator[tuple]:
    it = itertools.product(range(n_states), repeat=n_states * n_actions)
    return itertools.islice(it, start, stop)


def enumerate_systems(n_states: int, n_actions: int, cap: int = DEFAULT_CAP) -> Iterator[SystemTable]:
    """Every transition table once, in lexicographic order."""
    _check_cap(n_states, n_actions, cap)
    for t in _tables(n_states, n_actions):
        yield SystemTable(n_states, n_actions, t)


def full_space(n_states: int, n_actions: int, k: int) -> list[tuple[int, tuple[int, ...]]]:
    return [(s, us) for s in range(n_states) for us in itertools.product(range(n_actions), repeat=k)]


class ExplorationOrder:
    """A duplicate-free ordering of every (initial state, action sequence) pair."""

    def __init__(self, pairs: Sequence, n_states: int, n_actions: int, k: int):
        self.pairs = [(int(s), tuple(int(u) for u in us)) for s, us in pairs]
        self.n_states, self.n_actions, self.k = n_states, n_actions, k
        if sorted(self.pairs) != full_space(n_states, n_actions, k):
            raise ValueError("order must be a permutation of the full state/action-sequence space")

    @classmethod
    def random(cls, n_states: int, n_actions: int, k: int, rng: np.random.Generator) -> "ExplorationOrder":
        space = full_space(n_states, n_actions, k)
        perm = rng.permutation(len(space))
        return cls([space[i] for i in perm], n_states, n_actions, k)

    @classmethod
    def lexicographic(cls, n_states: int, n_actions: int, k: int) -> "ExplorationOrder":
        return cls(full_space(n_states, n_actions, k), n_states, n_actions, k)

    @property
    def space(self) -> tuple[int, int, int]:
        return (self.n_states, self.n_actions, self.k)

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExplorationOrder) and self.space == other.space and self.pairs == other.pairs


def run_table(f, s0: int, actions: Sequence[int], failure: frozenset) -> tuple[int, ...]:
    """Recorded states of one run; a failure state absorbs the rest of the run."""
    out = []
    s = s0
    for u in actions:
        if out and out[-1] in failure:
            out.append(out[-1])
            continue
        s = f(s, u)
        out.append(s)
    return tuple(out)


def failure_cost_fn(failure: frozenset) -> Callable:
    def cost(states: tuple) -> bool:
        return any(x in failure for x in states)
    return cost


def identity_cost(states: tuple) -> tuple:
    return states


COSTS = ("failure", "identity")


def _resolve_cost(cost, failure: frozenset) -> Callable:
    if cost == "failure":
        return failure_cost_fn(failure)
    if cost == "identity":
        return identity_cost
    if callable(cost):
        return cost
    raise ValueError(f"unknown cost {cost!r}")


def _tally_range(args) -> Counter:
    pairs, m, cost, n_states, n_actions, failure, start, stop = args
    costf = _resolve_cost(cost, failure)
    na = n_actions
    tally: Counter = Counter()
    for t in _tables(n_states, n_actions, start, stop):
        f = lambda s, u, t=t: t[s * na + u]
        g = tuple(costf(run_table(f, s0, us, failure)) for s0, us in pairs[:m])
        tally[g] += 1
    return tally


def default_failure(n_states: int) -> frozenset:
    return frozenset({n_states - 1})


def cost_distribution(order: ExplorationOrder, m: int, cost="failure", failure=None,
                      cap: int = DEFAULT_CAP, workers: int = 1) -> Counter:
    """Exact count of every length-``m`` cost sequence over all systems."""
    n_states, n_actions, _ = order.space
    total = _check_cap(n_states, n_actions, cap)
    if not 0 <= m <= len(order):
        raise ValueError(f"m={m} outside [0, {len(order)}]")
    failure = default_failure(n_states) if failure is None else frozenset(failure)
    pairs = order.pairs
    if workers <= 1 or total < 1000:
        return _tally_range((pairs, m, cost, n_states, n_actions, failure, 0, None))
    bounds = np.linspace(0, total, workers + 1).astype(int)
    jobs = [(pairs, m, cost, n_states, n_actions, failure, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    out: Counter = Counter()
    with ProcessPoolExecutor(workers) as ex:
        for part in ex.map(_tally_range, jobs):
            out.update(part)
    return out


def count_consistent(n_states: int, n_actions: int, transition: tuple[int, int, int],
                     cap: int = DEFAULT_CAP) -> int:
    """Number of systems mapping ``(s0, u)`` to ``s1``."""
    s0, u, s1 = transition
    _check_cap(n_states, n_actions, cap)
    if not (0 <= s0 < n_states and 0 <= u < n_actions and 0 <= s1 < n_states):
        raise ValueError("transition indices out of range")
    i = s0 * n_actions + u
    return sum(1 for t in _tables(n_states, n_actions) if t[i] == s1)


@dataclass
class NflVerdict:
    equal: bool
    tally1: Counter
    tally2: Counter
    first_difference: tuple | None = None

    def to_json(self) -> dict:
        def enc(t: Counter) -> list:
            return [[json.loads(json.dumps(list(k), default=_enc)), v] for k, v in sorted(t.items(), key=repr)]
        return {
            "equal": self.equal,
            "tally1": enc(self.tally1),
            "tally2": enc(self.tally2),
            "first_difference": None if self.first_difference is None
            else json.loads(json.dumps(list(self.first_difference), default=_enc)),
        }


def _enc(x):
    if isinstance(x, tuple):
        return list(x)
    if isinstance(x, (np.integer, np.bool_)):
        return x.item()
    raise TypeError(type(x))


def verify_nfl(order1: ExplorationOrder, order2: ExplorationOrder, m: int, cost="failure", failure=None,
               cap: int = DEFAULT_CAP, workers: int = 1,
               corrupt: Callable[[Counter], Counter] | None = None) -> NflVerdict:
    """Compare the exact cost-sequence tallies of two exploration orders.

    ``corrupt`` is a test hook applied to the second tally before comparison.
    """
    if order1.space != order2.space:
        raise ValueError("orders cover different spaces")
    t1 = cost_distribution(order1, m, cost, failure, cap, workers)
    t2 = cost_distribution(order2, m, cost, failure, cap, workers)
    if corrupt is not None:
        t2 = corrupt(Counter(t2))
    first = None
    for key in sorted(set(t1) | set(t2), key=repr):
        if t1.get(key, 0) != t2.get(key, 0):
            first = key
            break
    return NflVerdict(first is None, t1, t2, first)


def bump_first(tally: Counter) -> Counter:
    """Corruption hook: add one to the lexicographically first entry."""
    key = sorted(tally, key=repr)[0]
    tally[key] += 1
    return tally
