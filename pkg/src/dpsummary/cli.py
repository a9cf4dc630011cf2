"""Command line: run experiments, reproduce composition arithmetic, oracle checks."""

import argparse
import json
import logging
import math
import sys

import numpy as np

from .harness import ExperimentConfig, read_metrics, run_experiment, summarize
from .oracles import GREEDY_FACTOR, greedy_vs_optimal, regime_instance
from .privacy import compose_terms
from .protocol import MODES

# (eps per event, iterations, events per iteration, delta~, reported figure)
COMPOSE_PRESETS = {
    "validation": lambda p: (0.01, 1656, 1, 0.01, 1.4),
    "summary": lambda p: (0.01 / math.sqrt(5 * p), 5 * p, 1, 1e-4, 0.043),
}


def cmd_run(args):
    cfg = ExperimentConfig.from_yaml(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.mode is not None:
        over["mode"] = args.mode
    if args.workers is not None:
        over["workers"] = args.workers
    if over:
        cfg = ExperimentConfig.from_dict({**cfg.__dict__, **over})
    path = run_experiment(cfg, args.out)
    for (alg, size), stats in sorted(summarize(read_metrics(path)).items()):
        print(f"{alg:>14s} p={size:<5d} mmd_sq={stats['mmd_sq']:.6g} "
              f"pct_vs_greedy={stats['pct_vs_greedy']:.2f}")
    if args.dump_ledger:
        with open(path.parent / "metadata.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        for cell in meta["cells"]:
            if "private" in cell:
                for name, led in cell["private"]["ledgers"].items():
                    print(f"size={cell['size']} rep={cell['rep']} {name}: events={led['n_events']} "
                          f"eps={led['eps_total']:.6g} delta={led['delta_total']:.3g}")
    print(f"wrote {path}")
    return 0


def cmd_compose(args):
    reported = None
    if args.preset:
        eps, iters, per, delta, reported = COMPOSE_PRESETS[args.preset](args.p)
    else:
        if args.eps is None or args.iters is None:
            print("compose: need --eps and --iters, or --preset", file=sys.stderr)
            return 2
        eps, iters, per, delta = args.eps, args.iters, 1, 0.01
    eps = args.eps if args.eps is not None else eps
    iters = args.iters if args.iters is not None else iters
    per = args.events_per_iter if args.events_per_iter is not None else per
    delta = args.delta if args.delta is not None else delta
    terms = compose_terms([eps] * (iters * per), delta)
    print(f"events: {iters * per} x eps={eps:.6g}, delta~={delta:g}")
    print(f"basic:                 {terms.basic:.6f}")
    print(f"advanced (log 1/d~):   {terms.advanced:.6f}")
    print(f"advanced (log e+...):  {terms.advanced_e:.6f}")
    print(f"composed (min):        {terms.best:.6f}")
    if reported is not None:
        print(f"reported figure:       {reported}")
    return 0


def cmd_oracle(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    worst, violations = math.inf, 0
    for _ in range(args.instances):
        inst = regime_instance(args.n_points, rng)
        f_greedy, f_opt, j_opt = greedy_vs_optimal(inst, args.p)
        ratio = f_greedy / f_opt if f_opt > 0 else 1.0
        worst = min(worst, ratio)
        violations += f_greedy < GREEDY_FACTOR * f_opt - 1e-12
    print(f"instances={args.instances} N={args.n_points} p={args.p}")
    print(f"worst greedy/opt gain ratio: {worst:.6f} (bound {GREEDY_FACTOR:.6f})")
    print(f"violations: {violations}")
    return 0 if violations == 0 else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="dpsummary", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--workers", type=int)
    run.add_argument("--dump-ledger", action="store_true", help="print per-run ledger totals")
    run.set_defaults(func=cmd_run)

    comp = sub.add_parser("compose", help="composed epsilon for a run of identical releases")
    comp.add_argument("--eps", type=float)
    comp.add_argument("--iters", type=int)
    comp.add_argument("--events-per-iter", type=int)
    comp.add_argument("--delta", type=float)
    comp.add_argument("--preset", choices=sorted(COMPOSE_PRESETS))
    comp.add_argument("--p", type=int, default=100, help="summary size for the summary preset")
    comp.set_defaults(func=cmd_compose)

    orc = sub.add_parser("oracle", help="greedy vs brute force on small kernel-condition instances")
    orc.add_argument("--instances", type=int, default=20)
    orc.add_argument("--n-points", type=int, default=10)
    orc.add_argument("--p", type=int, default=3)
    orc.add_argument("--seed", type=int)
    orc.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
