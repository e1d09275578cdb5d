"""Seeded experiment orchestration: world setup, per-cell runs and output files."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import SimConfig
from .environment import Environment, load_map
from .errors import FuzzyMobError, OutputError
from .mobility import (
    FuzzySelector,
    MobilityContext,
    MobilityRun,
    NodeClass,
    RuleTable,
    ScoringParams,
    bundled_priorities,
    bundled_rule_table,
    derive_rule_table,
    init_nodes,
    load_priorities,
    load_rule_table,
    run_mobility,
)
from .netsim import METRICS, CbrSession, LinkParams, MetricsReport, aggregate_runs, run_traffic
from .trace import write_trace

log = logging.getLogger(__name__)


@dataclass
class World:
    env: Environment
    rules: RuleTable
    classes: dict[str, NodeClass]
    selector: FuzzySelector


def load_rules(cfg: SimConfig, env: Environment) -> RuleTable:
    labels = tuple(cfg.time_centers)
    classes = tuple(cfg.class_mix)
    if cfg.table_source == "derived":
        if cfg.priorities is not None:
            prio = load_priorities(cfg.priorities, classes, env.site_names, labels)
        else:
            prio = bundled_priorities(env.site_names, labels, classes)
        params = ScoringParams(cfg.p1, cfg.p2, env.max_dis)
        return derive_rule_table(prio, env, params, labels)
    if cfg.rules is not None:
        return load_rule_table(cfg.rules, env.site_names, labels, classes)
    table = bundled_rule_table(env.site_names, labels)
    missing = [c for c in classes if c not in table.tables]
    if missing:
        raise FuzzyMobError(f"bundled rule tables have no class {missing[0]!r}; supply a rules file")
    return table


def build_world(cfg: SimConfig) -> World:
    env = load_map(cfg.map)
    if env.area != cfg.area:
        env = Environment(env.graph, env.sites, cfg.area)
    rules = load_rules(cfg, env)
    classes = {name: NodeClass(i, name, cfg.speed_for(name)) for i, name in enumerate(cfg.class_mix)}
    selector = FuzzySelector(env, rules, cfg.time_centers, cfg.seconds_per_hour)
    return World(env, rules, classes, selector)


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (placement, mobility, traffic) generators for one seed.

    Placement and traffic streams do not depend on the model, so every model
    run with the same seed starts from the same nodes and carries the same
    sessions.
    """
    placement, mobility, traffic = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(placement), np.random.default_rng(mobility), np.random.default_rng(traffic))


def simulate(cfg: SimConfig, model: str, seed: int, world: World | None = None) -> MobilityRun:
    world = world or build_world(cfg)
    placement, mobility, _ = rng_streams(seed)
    nodes = init_nodes(cfg.nodes, cfg.class_mix, world.env, placement)
    ctx = MobilityContext(world.env, model, world.classes, world.selector, cfg.pause_range)
    return run_mobility(nodes, ctx, mobility, cfg.duration, cfg.dt, cfg.snapshot_interval)


def make_sessions(cfg: SimConfig, rng: np.random.Generator) -> list[CbrSession]:
    sessions = []
    for _ in range(cfg.sessions.count):
        src = int(rng.integers(cfg.nodes))
        dst = int(rng.integers(cfg.nodes - 1))
        dst += dst >= src
        sessions.append(
            CbrSession(src, dst, cfg.warmup, cfg.sessions.packet_size, cfg.sessions.rate, cfg.sessions.max_packets)
        )
    return sessions


def evaluate(cfg: SimConfig, run: MobilityRun, seed: int) -> MetricsReport:
    _, _, traffic = rng_streams(seed)
    link = LinkParams(cfg.range, cfg.bandwidth, cfg.hop_latency)
    return run_traffic(run.times, run.positions, make_sessions(cfg, traffic), link, (cfg.warmup, cfg.duration))


def run_cell(cfg: SimConfig, model: str, seed: int, trace_path: Path | None = None) -> MetricsReport:
    try:
        run = simulate(cfg, model, seed)
        if trace_path is not None:
            write_trace(run.initial, run.events, trace_path)
        return evaluate(cfg, run, seed)
    except FuzzyMobError as exc:
        raise FuzzyMobError(f"model={model} seed={seed}: {exc}") from exc


def _fmt(v) -> str:
    return "nan" if v is None else repr(float(v)) if isinstance(v, float) else str(v)


def metrics_csv(results: dict[tuple[str, int], MetricsReport]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["model", "seed", "metric", "value"])
    for (model, seed), rep in results.items():
        for m, v in rep.metrics().items():
            w.writerow([model, seed, m, _fmt(v)])
    return out.getvalue()


def plot_data(results: dict[tuple[str, int], MetricsReport], models: Sequence[str]) -> dict[str, str]:
    """One whitespace-separated table per metric: model, mean, sd, n."""
    files = {}
    for m in METRICS:
        lines = ["# model mean sd n"]
        for model in models:
            reps = [r for (mod, _), r in results.items() if mod == model]
            s = aggregate_runs(reps)[m]
            lines.append(f"{model} {_fmt(s.mean)} {_fmt(s.sd)} {s.n}")
        files[m] = "\n".join(lines) + "\n"
    return files


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def run_experiment(
    cfg: SimConfig,
    out_dir: str | Path | None = None,
    traces: bool = True,
    workers: int = 1,
) -> dict[tuple[str, int], MetricsReport]:
    """Every (model, seed) cell; writes ``metrics.csv``, ``plot_<metric>.dat`` and traces.

    Outputs are written only after every cell has succeeded.
    """
    build_world(cfg)  # fail fast on a bad map or table before touching the output directory
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create {out}: {exc.strerror}") from None
    cells = [(model, seed) for model in cfg.models for seed in cfg.seeds]
    tmp_traces = {
        cell: out / f".trace_{cell[0]}_seed{cell[1]}.tr" for cell in cells
    } if (out is not None and traces) else {}
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                futures = [pool.submit(run_cell, cfg, m, s, tmp_traces.get((m, s))) for m, s in cells]
                reports = [f.result() for f in futures]
        else:
            reports = []
            for m, s in cells:
                log.info("running model=%s seed=%d", m, s)
                reports.append(run_cell(cfg, m, s, tmp_traces.get((m, s))))
    except BaseException:
        for tmp in tmp_traces.values():
            tmp.unlink(missing_ok=True)
        raise
    results = dict(zip(cells, reports))
    if out is not None:
        for (m, s), tmp in tmp_traces.items():
            os.replace(tmp, out / f"trace_{m}_seed{s}.tr")
        for metric, text in plot_data(results, cfg.models).items():
            _atomic_write(out / f"plot_{metric}.dat", text)
        _atomic_write(out / "metrics.csv", metrics_csv(results))
    return results
