"""Multi-seed experiment runner comparing the private protocol with baselines.

Configs are flat YAML documents.  Recognised keys (defaults in
``ExperimentConfig``):

  data            synthetic | csv
  dim, owner_sizes, shift, validation_size      synthetic instance
  owners_csv, validation_csv, split, has_header  csv instance
  standardize     z-score everything with validation statistics
  sizes           list of summary sizes p
  repetitions     seeds per size
  seed            master seed
  algorithms      subset of [private, greedy, uniform, greedy_hashed]
  mode            theory | practical | noise_off
  d, gamma, bid_form, warm_start, seed_size, seed_scale, eps_target,
  delta_tilde, events_per_iter                   protocol settings
  eps_v, T_init, T_subs, eps_first, eps_subs_base, tau, eps_auc, eta
                  optional schedule overrides
  out_dir, workers, write_traces
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import _numeric
from .baselines import greedy_hashed, greedy_nonprivate, uniform_sampling
from .data import load_csv, split_owners, standardize, two_gaussian_shift
from .kernel import KernelParams, mmd_sq
from .privacy import make_schedule, practical_schedule
from .protocol import (MODES, ProtocolConfig, fmt, instance_parts, run_metadata, run_protocol,
                       write_trace_csv)

log = logging.getLogger(__name__)

ALGORITHMS = ("private", "greedy", "uniform", "greedy_hashed")
METRIC_FIELDS = ["alg", "size", "seed", "mmd_sq", "pct_vs_greedy", "accessed", "eps", "delta"]
MISSING = "NA"
SCHEDULE_KEYS = ("eps_v", "T_init", "T_subs", "eps_first", "eps_subs_base", "tau", "eps_auc", "eta")


@dataclass
class ExperimentConfig:
    data: str = "synthetic"
    dim: int = 2
    owner_sizes: list = field(default_factory=lambda: [250, 250, 250, 250])
    shift: float = 3.0
    validation_size: int = 200
    owners_csv: Optional[str] = None
    validation_csv: Optional[str] = None
    split: Optional[list] = None
    has_header: bool = False
    standardize: bool = False
    sizes: list = field(default_factory=lambda: [100])
    repetitions: int = 5
    seed: int = 0
    algorithms: list = field(default_factory=lambda: ["private", "greedy", "uniform"])
    mode: str = "practical"
    d: int = 140
    gamma: float = 0.1
    bid_form: str = "derived"
    warm_start: bool = True
    seed_size: int = 10
    seed_scale: float = 1.0
    eps_target: float = 1.0
    delta_tilde: float = 1e-4
    events_per_iter: int = 2
    eps_v: Optional[float] = None
    T_init: Optional[int] = None
    T_subs: Optional[int] = None
    eps_first: Optional[float] = None
    eps_subs_base: Optional[float] = None
    tau: Optional[int] = None
    eps_auc: Optional[float] = None
    eta: Optional[float] = None
    out_dir: str = "out"
    workers: int = 1
    write_traces: bool = True

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.sizes or any(int(s) != s or s < 1 for s in self.sizes):
            raise ValueError(f"sizes must be positive integers, got {self.sizes}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        if self.data not in ("synthetic", "csv"):
            raise ValueError(f"data must be 'synthetic' or 'csv', got {self.data!r}")
        if self.data == "csv" and not (self.owners_csv and self.validation_csv and self.split):
            raise ValueError("csv data needs owners_csv, validation_csv and split")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_yaml(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: expected a mapping of keys")
        return cls.from_dict(doc)


def derived_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def build_instance(cfg, rep):
    """Owners and validation set for repetition ``rep``; identical across sizes."""
    data_seed = derived_seed(cfg.seed, rep, 0)
    if cfg.data == "synthetic":
        owners, val = two_gaussian_shift(cfg.dim, tuple(cfg.owner_sizes), cfg.shift,
                                         cfg.validation_size, data_seed)
    else:
        pool = load_csv(cfg.owners_csv, cfg.has_header)
        val = load_csv(cfg.validation_csv, cfg.has_header)
        owners = split_owners(pool, cfg.split, data_seed)
    if cfg.standardize:
        owners, val = standardize(owners, val)
    return owners, val


def build_schedule(cfg, p, K):
    over = {k: getattr(cfg, k) for k in SCHEDULE_KEYS if getattr(cfg, k) is not None}
    common = {k: over[k] for k in ("tau", "eps_auc", "eta") if k in over}
    if cfg.mode == "theory":
        return make_schedule(cfg.eps_target, cfg.delta_tilde, max(p, 2), cfg.d, K,
                             events_per_iter=cfg.events_per_iter, **common)
    extra = {k: over[k] for k in ("eps_v", "T_init", "T_subs", "eps_first", "eps_subs_base") if k in over}
    return practical_schedule(p, cfg.d, K, eps_target=cfg.eps_target, delta_tilde=cfg.delta_tilde,
                              events_per_iter=cfg.events_per_iter, **common, **extra)


def protocol_config(cfg, p, rep, K):
    return ProtocolConfig(
        p=p, mode=cfg.mode, d=cfg.d, gamma=cfg.gamma, seed=derived_seed(cfg.seed, rep, p),
        schedule=build_schedule(cfg, p, K), bid_form=cfg.bid_form, warm_start=cfg.warm_start,
        seed_size=cfg.seed_size, seed_scale=cfg.seed_scale,
        # one basis per repetition so every size and algorithm shares it
        basis_seed=derived_seed(cfg.seed, rep, 1),
        eps_target=cfg.eps_target, delta_tilde=cfg.delta_tilde, events_per_iter=cfg.events_per_iter,
    )


def run_cell(cfg, p, rep):
    """Every enabled algorithm on one (size, repetition) instance.

    Returns (rows, cell metadata).  A failing algorithm yields a row of
    missing values and an error message; the others still run.
    """
    owners, val = build_instance(cfg, rep)
    kp = KernelParams(cfg.gamma)
    pconf = protocol_config(cfg, p, rep, len(owners))
    basis, seed_set = instance_parts(pconf, val.dim)
    total = sum(len(o.dataset) for o in owners)
    results, meta, traces = {}, {"size": p, "rep": rep, "protocol_seed": pconf.seed, "errors": {}}, {}
    for alg in cfg.algorithms:
        try:
            if alg == "private":
                res = run_protocol(owners, val, pconf, seed_set=seed_set)
                eps, delta = res.composed("owners")
                results[alg] = (mmd_sq(res.summary, val, kp), res.accessed_total, eps, delta)
                meta["private"] = run_metadata(res, pconf)
                traces[alg] = res
            elif alg == "greedy":
                g = greedy_nonprivate(owners, val, p, kp, seed_set)
                results[alg] = (mmd_sq(g.summary, val, kp), total, math.inf, 0.0)
            elif alg == "greedy_hashed":
                g = greedy_hashed(owners, val, p, basis, seed_set, cfg.bid_form)
                results[alg] = (mmd_sq(g.summary, val, kp), total, math.inf, 0.0)
            elif alg == "uniform":
                rng = np.random.default_rng(derived_seed(cfg.seed, rep, p, 2))
                u = uniform_sampling(owners, p, rng)
                results[alg] = (mmd_sq(u, val, kp), p, math.inf, 0.0)
        except Exception as exc:  # recorded per row; the cell keeps going
            log.exception("%s failed at size=%d rep=%d", alg, p, rep)
            meta["errors"][alg] = f"{type(exc).__name__}: {exc}"
    base = results.get("greedy", (None,))[0]
    rows = []
    for alg in cfg.algorithms:
        if alg not in results:
            rows.append([alg, p, rep] + [MISSING] * 5)
            continue
        mmd, acc, eps, delta = results[alg]
        pct = MISSING if base is None else fmt(pct_increase(mmd, base))
        rows.append([alg, p, rep, fmt(mmd), pct, acc, fmt(eps), fmt(delta)])
    return rows, meta, traces


def pct_increase(value, reference):
    return 100.0 * (value - reference) / reference


def _cell_job(args):
    cfg, p, rep = args
    rows, meta, traces = run_cell(cfg, p, rep)
    return rows, meta, {k: r.trace for k, r in traces.items()}


def run_experiment(cfg, out_dir=None):
    """Run every (size, repetition) cell and write metrics.csv + metadata.json.

    Cells may run in worker processes; results are merged in (size, rep)
    order so the files do not depend on scheduling.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, p, rep) for p in cfg.sizes for rep in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]

    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for rows, _, _ in results:
            w.writerows(rows)

    if cfg.write_traces:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for (_, p, rep), (_, _, tr) in zip(jobs, results):
            if "private" in tr:
                write_trace_csv(tr["private"], tdir / f"private_p{p}_rep{rep}.csv")

    meta = {
        "config": asdict(cfg),
        "backend": _numeric.backend(),
        "metric_fields": METRIC_FIELDS,
        "cells": [m for _, m, _ in results],
    }
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return metrics_path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(rows):
    """Mean mmd_sq and pct_vs_greedy per (alg, size), skipping missing values."""
    acc = {}
    for r in rows:
        key = (r["alg"], int(r["size"]))
        slot = acc.setdefault(key, {"mmd_sq": [], "pct_vs_greedy": []})
        for k in slot:
            if r[k] != MISSING:
                slot[k].append(float(r[k]))
    return {key: {k: (float(np.mean(v)) if v else math.nan) for k, v in slot.items()}
            for key, slot in acc.items()}
