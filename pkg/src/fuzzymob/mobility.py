"""Movement-pattern sub-model.

Destination choice (priority scoring, rule tables and the fuzzy selector),
path choice (Dijkstra on the road graph) and pauses, plus the two
random-waypoint baselines used for comparison.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .environment import Environment, Site, euclidean_distance, nearest_site
from .errors import (
    ConfigError,
    DomainError,
    DuplicateKeyError,
    IncompleteTableError,
    MalformedFileError,
    NoActivationError,
    RangeError,
    UnknownKeyError,
)
from .fuzzy_core import FuzzyRule, fuzzy_system_eval, time_membership
from .trace import TraceEvent

DEFAULT_TIME_CENTERS = {"Morning": 8.0, "Noon": 12.0, "Evening": 17.0}
DEFAULT_CLASSES = ("personal", "public", "ambulance")
DEFAULT_SPEED_RANGE = (0.0, 10.0)
DEFAULT_PAUSE_RANGE = (10.0, 300.0)
DEFAULT_SECONDS_PER_HOUR = 150.0

MODELS = ("fmm", "rwp_free", "rwp_graph")

PriorityTable = dict[tuple[str, str], float]  # (time label, site) -> A


@dataclass(frozen=True)
class NodeClass:
    id: int
    name: str
    speed_range: tuple[float, float] = DEFAULT_SPEED_RANGE
    priority_table: Mapping[tuple[str, str], float] | None = None

    def __post_init__(self):
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise RangeError(f"bad speed range {self.speed_range}", key=f"class {self.name}")


@dataclass(frozen=True)
class ScoringParams:
    p1: float = 0.6
    p2: float = 0.4
    max_dis: float = 8060.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise RangeError(f"must lie in [0, 1], got {v}", key=name)
        if not self.max_dis > 0:
            raise RangeError(f"must be positive, got {self.max_dis}", key="max_dis")


# --- priority and rule tables ----------------------------------------------------------


def _read_rows(source, header: Sequence[str]) -> tuple[str, list[tuple[int, list[str]]]]:
    # a str with no newline is a path; otherwise it is the file contents
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        try:
            text, name = path.read_text(), str(path)
        except OSError as exc:
            raise ConfigError(f"cannot read file ({exc.strerror})", key=str(path)) from None
    else:
        text, name = str(source), "<table>"
    rows = []
    reader = csv.reader(io.StringIO(text))
    first = True
    for lineno, row in enumerate(reader, 1):
        row = [c.strip() for c in row]
        if not row or not any(row) or row[0].startswith("#"):
            continue
        if first:
            first = False
            if [c.lower() for c in row] == list(header):
                continue
        if len(row) != len(header):
            raise MalformedFileError(f"expected {len(header)} fields", key=f"{name}:{lineno}")
        rows.append((lineno, row))
    return name, rows


def load_priorities(
    source,
    classes: Sequence[str],
    sites: Sequence[str],
    labels: Sequence[str],
) -> dict[str, PriorityTable]:
    """Read ``class,time_label,site,A`` rows into one complete table per class.

    ``source`` is a path or the file text itself.
    """
    name, rows = _read_rows(source, ("class", "time_label", "site", "a"))
    tables: dict[str, PriorityTable] = {c: {} for c in classes}
    for lineno, (cls, label, site, a) in rows:
        where = f"{name}:{lineno}"
        if cls not in tables:
            raise UnknownKeyError(f"unknown class {cls!r}", key=where)
        if label not in labels:
            raise UnknownKeyError(f"unknown time label {label!r}", key=where)
        if site not in sites:
            raise UnknownKeyError(f"unknown site {site!r}", key=where)
        try:
            value = float(a)
        except ValueError:
            raise MalformedFileError(f"priority {a!r} is not a number", key=where) from None
        if not 0.0 <= value <= 1.0:
            raise RangeError(f"priority {value} outside [0, 1]", key=where)
        if (label, site) in tables[cls]:
            raise DuplicateKeyError(f"duplicate row for ({cls}, {label}, {site})", key=where)
        tables[cls][(label, site)] = value
    for cls, table in tables.items():
        for label in labels:
            for site in sites:
                if (label, site) not in table:
                    raise IncompleteTableError(f"missing priority for ({label}, {site})", key=f"class {cls}")
    return tables


def format_priorities(tables: Mapping[str, PriorityTable], sites: Sequence[str], labels: Sequence[str]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["class", "time_label", "site", "A"])
    for cls, table in tables.items():
        for label in labels:
            for site in sites:
                w.writerow([cls, label, site, f"{table[(label, site)]:.6f}"])
    return out.getvalue()


class RuleTable:
    """Crisp destination tables: ``class -> (current site, time label) -> destination site``."""

    def __init__(self, tables: Mapping[str, Mapping[tuple[str, str], str]], sites: Sequence[str], labels: Sequence[str]):
        self.sites = tuple(sites)
        self.labels = tuple(labels)
        self.tables = {cls: dict(t) for cls, t in tables.items()}
        for cls, table in self.tables.items():
            for site in self.sites:
                for label in self.labels:
                    dest = table.get((site, label))
                    if dest is None:
                        raise IncompleteTableError(f"no rule for ({site}, {label})", key=f"class {cls}")
                    if dest not in self.sites:
                        raise UnknownKeyError(f"destination {dest!r} is not a site", key=f"class {cls}")

    @property
    def classes(self) -> list[str]:
        return list(self.tables)

    def lookup(self, cls: str, site: str, label: str) -> str:
        return lookup_destination(self, cls, site, label)

    def __eq__(self, other):
        return isinstance(other, RuleTable) and self.tables == other.tables

    def format(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["class", "current_site", "time_label", "destination_site"])
        for cls, table in self.tables.items():
            for site in self.sites:
                for label in self.labels:
                    w.writerow([cls, site, label, table[(site, label)]])
        return out.getvalue()


def lookup_destination(rules: RuleTable, cls: str, site: str, label: str) -> str:
    try:
        return rules.tables[cls][(site, label)]
    except KeyError:
        raise ConfigError(f"no rule for ({site}, {label})", key=f"class {cls}") from None


def load_rule_table(source, sites: Sequence[str], labels: Sequence[str], classes: Sequence[str] | None = None) -> RuleTable:
    """Read ``class,current_site,time_label,destination_site`` rows."""
    name, rows = _read_rows(source, ("class", "current_site", "time_label", "destination_site"))
    tables: dict[str, dict[tuple[str, str], str]] = {c: {} for c in classes or ()}
    for lineno, (cls, site, label, dest) in rows:
        where = f"{name}:{lineno}"
        if classes is not None and cls not in tables:
            raise UnknownKeyError(f"unknown class {cls!r}", key=where)
        for value, universe, what in ((site, sites, "site"), (dest, sites, "site"), (label, labels, "time label")):
            if value not in universe:
                raise UnknownKeyError(f"unknown {what} {value!r}", key=where)
        table = tables.setdefault(cls, {})
        if (site, label) in table:
            raise DuplicateKeyError(f"duplicate rule for ({cls}, {site}, {label})", key=where)
        table[(site, label)] = dest
    return RuleTable(tables, sites, labels)


def _bundled(name: str) -> str:
    return resources.files("fuzzymob.data").joinpath(name).read_text()


def bundled_rule_table(sites: Sequence[str], labels: Sequence[str] = tuple(DEFAULT_TIME_CENTERS)) -> RuleTable:
    return load_rule_table(_bundled("rules.csv"), sites, labels)


def bundled_priorities(
    sites: Sequence[str],
    labels: Sequence[str] = tuple(DEFAULT_TIME_CENTERS),
    classes: Sequence[str] = DEFAULT_CLASSES,
) -> dict[str, PriorityTable]:
    return load_priorities(_bundled("priorities.csv"), classes, sites, labels)


# --- destination scoring ---------------------------------------------------------------


def score_destination(a: float, d: float, params: ScoringParams) -> float:
    """Cost of a candidate destination with priority ``a`` at distance ``d``; lower is better."""
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"priority {a} outside [0, 1]")
    if d < 0 or d > params.max_dis * (1 + 1e-12):
        raise DomainError(f"distance {d} outside [0, {params.max_dis}]")
    return params.p1 * (1.0 - a) + params.p2 * (d / params.max_dis)


def derive_destinations(
    priorities: PriorityTable,
    sites: Sequence[Site],
    params: ScoringParams,
    labels: Sequence[str],
) -> dict[tuple[str, str], str]:
    """Rule table for one class: the lowest-scoring site for every (site, label) cell."""
    table = {}
    for here in sites:
        for label in labels:
            best = min(
                sites,
                key=lambda c: (
                    score_destination(priorities[(label, c.name)], euclidean_distance(here.center, c.center), params),
                    c.id,
                ),
            )
            table[(here.name, label)] = best.name
    return table


def derive_rule_table(
    priorities: Mapping[str, PriorityTable],
    env: Environment,
    params: ScoringParams | None = None,
    labels: Sequence[str] = tuple(DEFAULT_TIME_CENTERS),
) -> RuleTable:
    """Rule tables for every class from its priority table.

    ``params.max_dis`` defaults to the map's largest site-to-site distance.
    """
    if params is None:
        params = ScoringParams(max_dis=env.max_dis)
    tables = {cls: derive_destinations(p, env.sites, params, labels) for cls, p in priorities.items()}
    return RuleTable(tables, env.site_names, labels)


# --- fuzzy destination selection -------------------------------------------------------


def sim_hours(t: float, seconds_per_hour: float = DEFAULT_SECONDS_PER_HOUR) -> float:
    return (t / seconds_per_hour) % 24.0


class FuzzySelector:
    """Picks the next destination site from simulation time and position.

    One fuzzy rule per (time label, site) cell of a class's rule table, with
    the destination site's center as consequent. The crisp output point is
    snapped to the nearest site.
    """

    def __init__(
        self,
        env: Environment,
        rules: RuleTable,
        time_centers: Mapping[str, float] = DEFAULT_TIME_CENTERS,
        seconds_per_hour: float = DEFAULT_SECONDS_PER_HOUR,
    ):
        self.env = env
        self.rules = rules
        self.time_centers = dict(time_centers)
        self.seconds_per_hour = seconds_per_hour
        self.site_centers = env.site_centers
        self.fuzzy_rules: dict[str, list[FuzzyRule]] = {
            cls: [
                FuzzyRule(label, site, self.site_centers[table[(site, label)]])
                for label in rules.labels
                for site in rules.sites
            ]
            for cls, table in rules.tables.items()
        }

    def select(self, t: float, p: Sequence[float], cls: str) -> Site:
        hours = sim_hours(t, self.seconds_per_hour)
        try:
            point = fuzzy_system_eval(hours, p, self.fuzzy_rules[cls], self.time_centers, self.site_centers)
        except NoActivationError:
            return self.crisp(hours, p, cls)
        return nearest_site(point, self.env.sites)

    def crisp(self, hours: float, p: Sequence[float], cls: str) -> Site:
        label = max(self.rules.labels, key=lambda lb: time_membership(hours, self.time_centers[lb]))
        here = nearest_site(p, self.env.sites)
        return self.env.site(lookup_destination(self.rules, cls, here.name, label))


def select_destination_fuzzy(t: float, p: Sequence[float], cls: str, selector: FuzzySelector) -> Site:
    return selector.select(t, p, cls)


# --- node state machine ----------------------------------------------------------------

MOVING = "moving"
PAUSED = "paused"


@dataclass
class NodeState:
    node_id: int
    cls: str
    position: tuple[float, float]
    mode: str = PAUSED
    speed: float = 0.0
    waypoints: deque = field(default_factory=deque)  # (x, y, vertex id or None)
    vertex: int | None = None
    destination_site: str | None = None
    pause_remaining: float = 0.0


@dataclass
class MobilityContext:
    """Everything :func:`step_node` needs besides the node and the RNG."""

    env: Environment
    model: str = "fmm"
    classes: Mapping[str, NodeClass] = field(default_factory=dict)
    selector: FuzzySelector | None = None
    pause_range: tuple[float, float] = DEFAULT_PAUSE_RANGE

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}", key="model")
        if self.model == "fmm" and self.selector is None:
            raise ConfigError("fmm needs a fuzzy selector", key="model")


def rwp_select_destination(state: NodeState, env: Environment, rng: np.random.Generator, variant: str):
    """Uniform random target: a point in the area (``free``) or a graph vertex (``graph``)."""
    if variant == "free":
        # rounded to the trace precision so a written trace replays exactly
        return (round(float(rng.uniform(0.0, env.area[0])), 6), round(float(rng.uniform(0.0, env.area[1])), 6))
    if variant == "graph":
        verts = env.graph.vertices
        return verts[int(rng.integers(len(verts)))]
    raise ConfigError(f"unknown random-waypoint variant {variant!r}", key="variant")


def _draw_pause(ctx: MobilityContext, rng) -> float:
    return float(rng.uniform(*ctx.pause_range))


def _start_trip(state: NodeState, now: float, ctx: MobilityContext, rng) -> TraceEvent | None:
    """Choose the next destination; returns the first setdest event, or None when re-pausing."""
    env = ctx.env
    if ctx.model == "rwp_free":
        x, y = rwp_select_destination(state, env, rng, "free")
        state.waypoints = deque([(x, y, None)])
        state.destination_site = None
    else:
        if ctx.model == "fmm":
            site = ctx.selector.select(now, state.position, state.cls)
            target, state.destination_site = site.anchor_vertex, site.name
        else:
            target = rwp_select_destination(state, env, rng, "graph")
            state.destination_site = None
        if target == state.vertex:
            state.mode = PAUSED
            state.pause_remaining = _draw_pause(ctx, rng)
            return None
        path, _ = env.graph.shortest_path(state.vertex, target)
        state.waypoints = deque((*env.graph.coords[v], v) for v in path[1:])
    lo, hi = ctx.classes[state.cls].speed_range if state.cls in ctx.classes else (0.0, 10.0)
    state.speed = round(float(rng.uniform(lo, hi)), 6)
    state.mode = MOVING
    state.vertex = None
    x, y, _ = state.waypoints[0]
    return TraceEvent(now, state.node_id, (x, y), state.speed)


def step_node(state: NodeState, dt: float, now: float, ctx: MobilityContext, rng: np.random.Generator) -> list[TraceEvent]:
    """Advance ``state`` in place from ``now`` to ``now + dt``.

    Time left over after reaching a vertex, finishing a trip or ending a pause
    carries into the next leg, pause or trip within the same step.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    events = []
    budget = dt
    while budget > 0:
        if state.mode == PAUSED:
            if state.pause_remaining > budget:
                state.pause_remaining -= budget
                return events
            budget -= state.pause_remaining
            state.pause_remaining = 0.0
            ev = _start_trip(state, now + (dt - budget), ctx, rng)
            if ev is not None:
                events.append(ev)
            continue
        x, y, vertex = state.waypoints[0]
        px, py = state.position
        remaining = math.hypot(x - px, y - py)
        travel = state.speed * budget
        if travel < remaining:
            f = travel / remaining
            state.position = (px + (x - px) * f, py + (y - py) * f)
            return events
        budget -= remaining / state.speed if state.speed > 0 else budget
        state.position = (x, y)
        state.waypoints.popleft()
        state.vertex = vertex
        if state.waypoints:
            nx, ny, _ = state.waypoints[0]
            events.append(TraceEvent(now + (dt - budget), state.node_id, (nx, ny), state.speed))
        else:
            state.mode = PAUSED
            state.pause_remaining = _draw_pause(ctx, rng)
    return events


def class_counts(n: int, proportions: Sequence[float]) -> list[int]:
    """Split ``n`` by ``proportions`` with largest-remainder rounding (ties to the earlier class)."""
    raw = [n * p for p in proportions]
    counts = [math.floor(r) for r in raw]
    short = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def init_nodes(
    n: int,
    mix: Mapping[str, float],
    env: Environment,
    rng: np.random.Generator,
    warmup_pause: tuple[float, float] = (0.0, 60.0),
) -> list[NodeState]:
    """Place ``n`` paused nodes on uniformly drawn graph vertices, classes split by ``mix``."""
    if n < 1:
        raise ConfigError(f"need at least one node, got {n}", key="nodes")
    if len(env.graph) == 0:
        raise ConfigError("empty graph", key="map")
    total = sum(mix.values())
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise ConfigError(f"class proportions sum to {total}, not 1", key="class_mix")
    labels = [cls for cls, c in zip(mix, class_counts(n, list(mix.values()))) for _ in range(c)]
    verts = env.graph.vertices
    picks = rng.integers(len(verts), size=n)
    pauses = rng.uniform(*warmup_pause, size=n)
    nodes = []
    for i in range(n):
        v = verts[int(picks[i])]
        nodes.append(
            NodeState(
                node_id=i,
                cls=labels[i],
                position=env.graph.coords[v],
                vertex=v,
                pause_remaining=float(pauses[i]),
            )
        )
    return nodes


@dataclass
class MobilityRun:
    """Sampled positions (``times x nodes x 2``) plus the movement trace."""

    times: np.ndarray
    positions: np.ndarray
    initial: dict[int, tuple[float, float]]
    events: list[TraceEvent]
    classes: list[str]


def run_mobility(
    nodes: list[NodeState],
    ctx: MobilityContext,
    rng: np.random.Generator,
    duration: float,
    dt: float = 1.0,
    sample_interval: float = 1.0,
) -> MobilityRun:
    """Step every node from 0 to ``duration`` and sample positions every ``sample_interval``."""
    per_sample = sample_interval / dt
    if dt <= 0 or per_sample < 1 or abs(per_sample - round(per_sample)) > 1e-9:
        raise ConfigError("sample interval must be a positive multiple of dt", key="snapshot_interval")
    per_sample = int(round(per_sample))
    steps = int(round(duration / dt))
    initial = {s.node_id: s.position for s in nodes}
    times = [0.0]
    samples = [[s.position for s in nodes]]
    events: list[TraceEvent] = []
    for k in range(steps):
        now = k * dt
        for s in nodes:
            events.extend(step_node(s, dt, now, ctx, rng))
        if (k + 1) % per_sample == 0:
            times.append((k + 1) * dt)
            samples.append([s.position for s in nodes])
    return MobilityRun(
        np.array(times), np.array(samples, dtype=float), initial, events, [s.cls for s in nodes]
    )
