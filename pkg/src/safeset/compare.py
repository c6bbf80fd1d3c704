"""Aggressiveness of testing algorithms via their almost-safe sets.

A testing algorithm is more aggressive than another when its almost-safe set
is a strict subset of the other's.  Set arithmetic is done on centroids, so
both covers must share the operational space and delta.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import action_source, derive_seed, execute_run
from .covering import CoveringSet, centroid_key
from .quantify import QuantifyResult, quantify
from .stats import ConfidenceSpec, MassFunction, UNIFORM, sample_centroids

MORE = "more"
LESS = "less"
EQUAL = "equal"
INCOMPARABLE = "incomparable"

FALSIFIED = "falsified-by-2"
CONTAINED = "contained"
SMALL_ESCAPE = "contained-with-small-escape"
FULL = "full-quantification"


def _check(a: CoveringSet, b: CoveringSet) -> None:
    if not a.compatible(b):
        raise ValueError("covers differ in space or delta")


def iou(a: CoveringSet, b: CoveringSet) -> float:
    _check(a, b)
    ka, kb = a.keys(), b.keys()
    union = ka | kb
    if not union:
        return 1.0
    return len(ka & kb) / len(union)


def diff_fraction(a: CoveringSet, b: CoveringSet, whole: CoveringSet) -> float:
    """Centroids of ``a`` missing from ``b``, as a fraction of ``whole``."""
    _check(a, b)
    _check(a, whole)
    if len(whole) == 0:
        raise ValueError("reference cover is empty")
    return len(a.keys() - b.keys()) / len(whole)


def aggressiveness_order(phi1: CoveringSet, phi2: CoveringSet) -> str:
    """Order of the tester behind ``phi1`` relative to the one behind ``phi2``."""
    _check(phi1, phi2)
    k1, k2 = phi1.keys(), phi2.keys()
    if k1 == k2:
        return EQUAL
    if k1 < k2:
        return MORE
    if k1 > k2:
        return LESS
    return INCOMPARABLE


def mass_ratio(phi_prime: CoveringSet, phi: CoveringSet, p: MassFunction | None = None) -> float:
    """Mass of ``phi_prime`` outside ``phi`` relative to all of ``phi_prime``."""
    p = p or UNIFORM
    inner = phi.keys()
    keys = [tuple(k) for k in map(centroid_key, phi_prime.centroids)]
    if not inner <= set(keys):
        raise ValueError("phi is not contained in phi_prime")
    if not keys:
        return 0.0
    w = p.weights(phi_prime.centroids)
    total = w.sum()
    if not total > 0:
        raise ValueError("zero total mass")
    extra = sum(wi for wi, k in zip(w, keys) if k not in inner)
    return float(extra / total)


@dataclass
class AggressivenessVerdict:
    agg: bool
    outcome: str
    runs_used: int
    escape_mass_ratio: float
    te1: str = ""
    te2: str = ""
    phi1: CoveringSet | None = None
    phi2: CoveringSet | None = None
    q1: QuantifyResult | None = None
    q2: QuantifyResult | None = None
    falsifying_run: object = None

    def to_json(self) -> dict:
        doc = {
            "te1": self.te1,
            "te2": self.te2,
            "agg": self.agg,
            "outcome": self.outcome,
            "runs_used": self.runs_used,
            "escape_mass_ratio": self.escape_mass_ratio,
            "phi1_size": None if self.phi1 is None else len(self.phi1),
            "phi2_size": None if self.phi2 is None else len(self.phi2),
            "te1_quantify_runs": None if self.q1 is None else self.q1.runs_total,
            "te2_quantify_runs": None if self.q2 is None else self.q2.runs_total,
        }
        if self.falsifying_run is not None:
            doc["falsifying_run"] = self.falsifying_run.to_json()
        return doc


def compare_algorithms(te1, te2, oss, system, spec: ConfidenceSpec, delta, p: MassFunction | None = None,
                       seed: int = 0, k: int = 1, max_runs: int = 200_000,
                       q1: QuantifyResult | None = None, q2: QuantifyResult | None = None,
                       **quantify_kw) -> AggressivenessVerdict:
    """Decide whether ``te1`` is almost more (or equally) aggressive than ``te2``.

    ``te1`` and ``te2`` are testing actors (policies or action samplers).  A
    precomputed quantification of ``te1`` may be passed as ``q1``; otherwise it
    is computed here; likewise ``q2`` for ``te2``, used only if the full
    quantification branch is reached.  ``runs_used`` counts only the validation runs under
    ``te2`` plus, when reached, the runs of ``te2``'s own quantification.
    """
    p = p or UNIFORM
    name1 = getattr(te1, "name", str(te1))
    name2 = getattr(te2, "name", str(te2))
    if q1 is None:
        q1 = quantify(oss, system, te1, spec, delta, derive_seed(seed, 1, stream=8), max_runs, k=k, **quantify_kw)
    phi1 = q1.cover
    phi2 = phi1
    n = spec.n
    if te1 is te2 or _descriptor(te1) == _descriptor(te2):
        # same tester: its own certified set is trivially contained
        return AggressivenessVerdict(True, CONTAINED, n, 0.0, name1, name2, phi1, phi1, q1)
    if len(phi1) == 0:
        return AggressivenessVerdict(True, CONTAINED, 0, 0.0, name1, name2, phi1, phi1, q1)

    rng = np.random.default_rng(derive_seed(seed, 2, stream=8))
    picks = sample_centroids(phi1, n, rng, p)
    vseed = derive_seed(seed, 3, stream=8)
    for i in range(n):
        s0 = phi1.centroids[picks[i]]
        run_seed = derive_seed(vseed, i)
        run = execute_run(system, action_source(te2, k, run_seed), s0, k, run_seed)
        if run.hit_failure:
            return AggressivenessVerdict(False, FALSIFIED, i + 1, 0.0, name1, name2, phi1, None, q1,
                                         falsifying_run=run)
        for s in run.states:
            if not phi2.contains(s):
                phi2 = phi2.add(s)

    ratio = mass_ratio(phi2, phi1, p)
    if ratio < spec.epsilon:
        outcome = CONTAINED if len(phi2) == len(phi1) else SMALL_ESCAPE
        return AggressivenessVerdict(True, outcome, n, ratio, name1, name2, phi1, phi2, q1)

    if q2 is None:
        q2 = quantify(oss, system, te2, spec, delta, derive_seed(seed, 4, stream=8), max_runs, k=k, **quantify_kw)
    agg = phi1.keys() <= q2.cover.keys()
    return AggressivenessVerdict(agg, FULL, n + q2.runs_total, ratio, name1, name2, phi1, q2.cover, q1, q2)


def _descriptor(actor) -> tuple:
    return (type(actor).__name__, getattr(actor, "name", None), hasattr(actor, "act"))


def write_matrix_csv(path, rows: list[dict]) -> None:
    """Pairwise comparison table, one row per ordered pair."""
    if not rows:
        open(path, "w").close()
        return
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def pair_row(label0: str, label1: str, phi0: CoveringSet, phi1: CoveringSet, whole: CoveringSet) -> dict:
    return {
        "phi0": label0,
        "phi1": label1,
        "iou": round(iou(phi0, phi1), 6),
        "diff_01": round(diff_fraction(phi0, phi1, whole), 6),
        "diff_10": round(diff_fraction(phi1, phi0, whole), 6),
        "order": aggressiveness_order(phi0, phi1),
    }


def save_verdict(path, verdict: AggressivenessVerdict) -> None:
    with open(path, "w") as fh:
        json.dump(verdict.to_json(), fh, indent=2)
