"""Command-line entry point: ``fuzzymob {run,trace,validate,derive-rules}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import SimConfig, load_config
from .errors import FuzzyMobError
from .experiment import build_world, metrics_csv, run_experiment, simulate
from .environment import load_map
from .mobility import MODELS, ScoringParams, bundled_priorities, derive_rule_table, load_priorities
from .trace import write_trace


def _config(args) -> SimConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = tuple(args.seed)
    if getattr(args, "model", None):
        changes["models"] = tuple(args.model)
    return cfg.with_overrides(**changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    results = run_experiment(cfg, args.out_dir, traces=not args.no_traces, workers=args.workers)
    if args.out_dir is None:
        sys.stdout.write(metrics_csv(results))
    return 0


def cmd_trace(args) -> int:
    cfg = _config(args)
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(cfg)
    for model in cfg.models:
        for seed in cfg.seeds:
            run = simulate(cfg, model, seed, world)
            path = write_trace(run.initial, run.events, out / f"trace_{model}_seed{seed}.tr")
            print(path)
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    world = build_world(cfg)
    env = world.env
    print(f"config ok: models={','.join(cfg.models)} nodes={cfg.nodes} seeds={len(cfg.seeds)}")
    print(f"map ok: {len(env.graph)} vertices, {len(env.graph.edges)} edges, {len(env.sites)} sites, max_dis={env.max_dis:.1f} m")
    print(f"rules ok: {len(world.rules.tables)} classes x {len(env.sites)} sites x {len(world.rules.labels)} labels")
    return 0


def cmd_derive_rules(args) -> int:
    cfg = load_config(args.config)
    env = load_map(cfg.map)
    labels, classes = tuple(cfg.time_centers), tuple(cfg.class_mix)
    source = args.priorities or cfg.priorities
    if source is None:
        prio = bundled_priorities(env.site_names, labels, classes)
    else:
        prio = load_priorities(source, classes, env.site_names, labels)
    table = derive_rule_table(prio, env, ScoringParams(cfg.p1, cfg.p2, env.max_dis), labels)
    sys.stdout.write(table.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzymob", description="Fuzzy vehicular mobility simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True):
        p.add_argument("--config", type=Path, help="YAML/JSON config file (defaults apply when omitted)")
        if seeds:
            p.add_argument("--seed", type=int, action="append", help="seed to run; repeat for several")
            p.add_argument("--model", action="append", choices=MODELS, help="model to run; repeat for several")

    p = sub.add_parser("run", help="run the experiment and write metrics")
    common(p)
    p.add_argument("--out-dir", type=Path, help="output directory (metrics CSV goes to stdout when omitted)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-traces", action="store_true", help="skip writing movement traces")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="generate movement traces only")
    common(p)
    p.add_argument("--out-dir", type=Path)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("validate", help="check config, map and rule tables")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("derive-rules", help="derive rule tables from a priority file")
    common(p, seeds=False)
    p.add_argument("--priorities", type=Path, help="priority file (defaults to the bundled one)")
    p.set_defaults(func=cmd_derive_rules)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FuzzyMobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
