"""Command-line experiment runner.

``safeset <command> --config FILE [--seed N] [--out DIR]``

Exit codes: 0 success (certificate, agg=true, equal tallies), 1 usage or
configuration error, 2 falsified / not more aggressive / unequal tallies,
3 quantification did not converge within ``max_runs``.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys

import numpy as np

from .compare import compare_algorithms, pair_row, save_verdict, write_matrix_csv
from .config import ConfigError, ExperimentConfig, load_config
from .core import derive_seed
from .covering import CoveringSet, build_covering
from .nflbench import ExplorationOrder, bump_first, count_consistent, default_failure, verify_nfl
from .quantify import quantify
from .stats import Falsified, validate_safe_set

log = logging.getLogger("safeset")

EXIT_OK, EXIT_USAGE, EXIT_FALSE, EXIT_NONCONVERGED = 0, 1, 2, 3
COMMANDS = ("validate", "quantify", "compare", "nfl", "report", "train-es")


def _dump(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve(path: str, cfg_path: str) -> str:
    if os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.join(os.path.dirname(os.path.abspath(cfg_path)), path)


# validate -----------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig, cfg_path: str) -> int:
    cand = cfg.validate.get("candidate")
    if not cand:
        raise ConfigError("validate.candidate must name a cover CSV (or 'full')")
    system = cfg.system()
    if cand == "full":
        cover = build_covering(system.oss, cfg.delta)
    else:
        path = _resolve(cand, cfg_path)
        if not os.path.exists(path):
            raise ConfigError(f"candidate cover {cand!r} not found")
        try:
            cover = CoveringSet.from_csv(path, system.oss, cfg.delta)
        except ValueError as exc:
            raise ConfigError(f"bad candidate cover: {exc}") from exc
    os.makedirs(cfg.out, exist_ok=True)
    try:
        res = validate_safe_set(cover, cfg.actor(), system, cfg.spec, cfg.horizon(), cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if isinstance(res, Falsified):
        _dump(os.path.join(cfg.out, "falsified.json"), res.to_json())
        log.info("falsified at run %d (%s)", res.run_index, res.reason)
        return EXIT_FALSE
    res.save(os.path.join(cfg.out, "certificate.json"), os.path.join(cfg.out, "certificate_centroids.csv"))
    log.info("certified %d centroids with %d runs", len(cover), res.runs_used)
    return EXIT_OK


# quantify -----------------------------------------------------------------

def _quantify(cfg: ExperimentConfig, actor, seed: int):
    system = cfg.system()
    return quantify(system.oss, system, actor, cfg.spec, cfg.delta, seed, cfg.max_runs,
                    k=cfg.horizon(), prune_escapes=cfg.prune_escapes)


def cmd_quantify(cfg: ExperimentConfig, cfg_path: str) -> int:
    res = _quantify(cfg, cfg.actor(), cfg.seed)
    res.save(cfg.out, "quantify")
    log.info("quantify: %s", res.summary())
    return EXIT_OK if res.valid else EXIT_NONCONVERGED


# compare ------------------------------------------------------------------

def _verdict_row(row: dict, v) -> dict:
    row = dict(row)
    row.update({"outcome": v.outcome, "agg": v.agg, "runs_used": v.runs_used,
                "escape_mass_ratio": round(v.escape_mass_ratio, 6)})
    return row


def cmd_compare(cfg: ExperimentConfig, cfg_path: str) -> int:
    system = cfg.system()
    os.makedirs(cfg.out, exist_ok=True)
    kw = dict(spec=cfg.spec, delta=cfg.delta, seed=cfg.seed, k=cfg.horizon(), max_runs=cfg.max_runs,
              prune_escapes=cfg.prune_escapes)
    if not cfg.compare.get("matrix", False):
        te1 = cfg.actor()
        te2 = cfg.actor("te2")
        v = compare_algorithms(te1, te2, system.oss, system, **kw)
        save_verdict(os.path.join(cfg.out, "verdict.json"), v)
        log.info("compare %s vs %s: agg=%s outcome=%s runs=%d", v.te1, v.te2, v.agg, v.outcome, v.runs_used)
        return EXIT_OK if v.agg else EXIT_FALSE
    if cfg.testbed != "vehicle":
        raise ConfigError("the comparison matrix is defined for the vehicle testbed")
    labels = list(cfg.compare.get("adversaries", ["s", "b", "h", "p", "e"]))
    theta = cfg.vehicle.get("theta")
    from .vehicle import make_adversary
    actors = {lab: make_adversary(lab, theta) for lab in labels}
    whole = build_covering(system.oss, cfg.delta)
    quant = {}
    for i, lab in enumerate(labels):
        quant[lab] = _quantify(cfg, actors[lab], derive_seed(cfg.seed, i, stream=9))
        quant[lab].save(cfg.out, f"quantify_{lab}")
        log.info("quantify %s: %d centroids, %d runs", lab, len(quant[lab].cover), quant[lab].runs_total)
    rows = []
    with open(os.path.join(cfg.out, "verdicts.jsonl"), "w") as fh:
        for a in labels:
            for b in labels:
                if a == b:
                    continue
                v = compare_algorithms(actors[a], actors[b], system.oss, system, q1=quant[a], q2=quant[b], **kw)
                fh.write(json.dumps(v.to_json(), sort_keys=True) + "\n")
                rows.append(_verdict_row(pair_row(a, b, quant[a].cover, quant[b].cover, whole), v))
    write_matrix_csv(os.path.join(cfg.out, "matrix.csv"), rows)
    ok = all(q.valid for q in quant.values())
    return EXIT_OK if ok else EXIT_NONCONVERGED


# nfl ----------------------------------------------------------------------

def cmd_nfl(cfg: ExperimentConfig, cfg_path: str) -> int:
    n = cfg.nfl
    ns, na, k = int(n.get("n_states", 2)), int(n.get("n_actions", 2)), int(n.get("k", 1))
    m = int(n.get("m", 2))
    rng = np.random.default_rng(derive_seed(cfg.seed, 0, stream=10))
    kind = n.get("orders", "random")
    if kind == "random":
        o1 = ExplorationOrder.random(ns, na, k, rng)
        o2 = ExplorationOrder.random(ns, na, k, rng)
    elif kind == "identical":
        o1 = o2 = ExplorationOrder.random(ns, na, k, rng)
    elif kind == "lexicographic":
        o1 = ExplorationOrder.lexicographic(ns, na, k)
        o2 = ExplorationOrder.random(ns, na, k, rng)
    else:
        raise ConfigError("nfl.orders must be random, identical or lexicographic")
    if m > len(o1):
        raise ConfigError(f"nfl.m must be at most {len(o1)}")
    failure = n.get("failure")
    try:
        v = verify_nfl(o1, o2, m, n.get("cost", "failure"), failure, workers=int(n.get("workers", 1)),
                       corrupt=bump_first if n.get("corrupt", False) else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    doc = v.to_json()
    doc.update({"n_states": ns, "n_actions": na, "k": k, "m": m, "cost": n.get("cost", "failure"),
                "order1": [[s, list(u)] for s, u in o1.pairs], "order2": [[s, list(u)] for s, u in o2.pairs]})
    fail = sorted(default_failure(ns) if failure is None else failure)
    doc["count_consistent"] = {f"{s}-{u}-{t}": count_consistent(ns, na, (s, u, t))
                               for s in range(ns) for u in range(na) for t in range(ns)}
    doc["failure_set"] = fail
    os.makedirs(cfg.out, exist_ok=True)
    _dump(os.path.join(cfg.out, "nfl.json"), doc)
    log.info("nfl: equal=%s first_difference=%s", v.equal, v.first_difference)
    return EXIT_OK if v.equal else EXIT_FALSE


# report -------------------------------------------------------------------

def slice_rows(cover: CoveringSet, whole: CoveringSet, v0: float, v1: float) -> list[dict]:
    """Covered flag on the d_x-d_y centroid grid at fixed speeds."""
    dxs = sorted({float(c[0]) for c in whole.centroids})
    dys = sorted({float(c[1]) for c in whole.centroids})
    return [{"d_x": dx, "d_y": dy, "v0": v0, "v1": v1, "covered": int(cover.contains([dx, dy, v0, v1]))}
            for dx in dxs for dy in dys]


def cmd_report(cfg: ExperimentConfig, cfg_path: str) -> int:
    if cfg.testbed != "vehicle":
        raise ConfigError("report is defined for the vehicle testbed")
    from .vehicle import VehicleSystem, failure_rate, make_adversary, uniform_inits
    rep = cfg.report
    art = _resolve(rep.get("artifacts", cfg.out), cfg_path)
    found = sorted(glob.glob(os.path.join(art, "*_centroids.csv"))) if os.path.isdir(art) else []
    found = [f for f in found if not os.path.basename(f).startswith("certificate")]
    if not found:
        log.error("no quantification artifacts in %s", art)
        return EXIT_USAGE
    params = cfg.vehicle_params()
    subjects = list(rep.get("subjects", ["a", "c"]))
    labels = list(rep.get("adversaries", ["s", "b", "h", "p", "e"]))
    n = int(rep.get("runs", 1000))
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for subj in subjects:
        system = VehicleSystem(subj, params)
        inits = uniform_inits(system.oss, n, cfg.seed)
        row = {"subject": subj}
        for lab in labels:
            row[lab] = round(failure_rate(system, make_adversary(lab, cfg.vehicle.get("theta")), inits,
                                          cfg.seed, cfg.horizon()), 6)
        rows.append(row)
        log.info("failure rates %s", row)
    with open(os.path.join(cfg.out, "failure_rates.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["subject"] + labels)
        w.writeheader()
        w.writerows(rows)
    oss = VehicleSystem("mix", params).oss
    whole = build_covering(oss, cfg.delta)
    v0, v1 = float(rep.get("v0", 5.0)), float(rep.get("v1", 20.0))
    for path in found:
        cover = CoveringSet.from_csv(path, oss, cfg.delta)
        stem = os.path.basename(path)[: -len("_centroids.csv")]
        with open(os.path.join(cfg.out, f"slice_{stem}.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["d_x", "d_y", "v0", "v1", "covered"])
            w.writeheader()
            w.writerows(slice_rows(cover, whole, v0, v1))
    return EXIT_OK


# train-es -----------------------------------------------------------------

def cmd_train_es(cfg: ExperimentConfig, cfg_path: str) -> int:
    if cfg.testbed != "vehicle":
        raise ConfigError("train-es is defined for the vehicle testbed")
    from .vehicle.es import EsParams, RewardSpec, es_train, save_theta
    doc = dict(cfg.es)
    reward = RewardSpec(**doc.pop("reward", {}))
    try:
        params = EsParams(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad es section: {exc}") from exc
    res = es_train(reward, params, cfg.seed, cfg.vehicle.get("subject", "mix"), cfg.vehicle_params())
    os.makedirs(cfg.out, exist_ok=True)
    save_theta(os.path.join(cfg.out, "theta_e.json"), res.theta,
               meta={"seed": cfg.seed, "best_reward": res.best_reward, "initial_reward": res.initial_reward})
    _dump(os.path.join(cfg.out, "es_curve.json"), res.curve)
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "quantify": cmd_quantify,
    "compare": cmd_compare,
    "nfl": cmd_nfl,
    "report": cmd_report,
    "train-es": cmd_train_es,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="safeset", description="Almost-safe set experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML experiment file")
    ap.add_argument("--seed", type=int, default=None, help="override the master seed")
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.out)
        return HANDLERS[args.command](cfg, args.config)
    except ConfigError as exc:
        print(f"safeset: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
