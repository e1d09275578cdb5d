"""ns-2 ``setdest`` movement traces: writing, parsing and replay."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MalformedFileError, OutputError


@dataclass(frozen=True)
class TraceEvent:
    """At ``time`` node ``node`` starts moving toward ``dest`` at ``speed`` m/s."""

    time: float
    node: int
    dest: tuple[float, float]
    speed: float


_SET = re.compile(r"^\$node_\((\d+)\) set ([XYZ])_ (\S+)$")
_SETDEST = re.compile(r'^\$ns_ at (\S+) "\$node_\((\d+)\) setdest (\S+) (\S+) (\S+)"$')


def format_trace(initial: Mapping[int, Sequence[float]], events: Iterable[TraceEvent]) -> str:
    lines = []
    for node in sorted(initial):
        x, y = initial[node]
        lines.append(f"$node_({node}) set X_ {x:.6f}")
        lines.append(f"$node_({node}) set Y_ {y:.6f}")
    for ev in sorted(events, key=lambda e: (e.time, e.node)):
        lines.append(
            f'$ns_ at {ev.time:.6f} "$node_({ev.node}) setdest '
            f'{ev.dest[0]:.6f} {ev.dest[1]:.6f} {ev.speed:.6f}"'
        )
    return "\n".join(lines) + "\n"


def write_trace(initial: Mapping[int, Sequence[float]], events: Iterable[TraceEvent], path) -> Path:
    path = Path(path)
    try:
        path.write_text(format_trace(initial, events))
    except OSError as exc:
        raise OutputError(f"cannot write trace {path}: {exc.strerror}") from None
    return path


def parse_trace(text: str) -> tuple[dict[int, tuple[float, float]], list[TraceEvent]]:
    """Inverse of :func:`format_trace`. Raises on any line it does not understand."""
    initial: dict[int, list[float]] = {}
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SETDEST.match(line)
        if m:
            t, node, x, y, s = m.groups()
            events.append(TraceEvent(float(t), int(node), (float(x), float(y)), float(s)))
            continue
        m = _SET.match(line)
        if m:
            node, axis, value = m.groups()
            if axis != "Z":
                initial.setdefault(int(node), [math.nan, math.nan])["XY".index(axis)] = float(value)
            continue
        raise MalformedFileError(f"unrecognized trace line: {line!r}", key=f"trace:{lineno}")
    for node, xy in initial.items():
        if any(math.isnan(v) for v in xy):
            raise MalformedFileError("initial position incomplete", key=f"node {node}")
    return {n: (xy[0], xy[1]) for n, xy in initial.items()}, events


def read_trace(path) -> tuple[dict[int, tuple[float, float]], list[TraceEvent]]:
    return parse_trace(Path(path).read_text())


def replay(initial: Mapping[int, Sequence[float]], events: Sequence[TraceEvent], times: Sequence[float]) -> np.ndarray:
    """Positions of every node at each of ``times`` (ascending), ns-2 semantics.

    A ``setdest`` makes the node head from wherever it is toward the target in
    a straight line, stopping on arrival. Returns an array of shape
    ``(len(times), n_nodes, 2)`` with nodes in ascending id order.
    """
    nodes = sorted(initial)
    index = {n: i for i, n in enumerate(nodes)}
    per_node: dict[int, list[TraceEvent]] = {n: [] for n in nodes}
    for ev in events:
        if ev.node not in per_node:
            raise MalformedFileError("event for a node without an initial position", key=f"node {ev.node}")
        per_node[ev.node].append(ev)
    out = np.empty((len(times), len(nodes), 2))
    for node, evs in per_node.items():
        evs.sort(key=lambda e: e.time)
        col = index[node]
        pos = np.asarray(initial[node], dtype=float)
        leg_start = pos
        leg: TraceEvent | None = None
        k = 0
        for ti, t in enumerate(times):
            while k < len(evs) and evs[k].time <= t:
                if leg is not None:
                    leg_start = _leg_position(leg_start, leg, evs[k].time)
                leg = evs[k]
                k += 1
            out[ti, col] = leg_start if leg is None else _leg_position(leg_start, leg, t)
    return out


def _leg_position(start: np.ndarray, leg: TraceEvent, t: float) -> np.ndarray:
    dest = np.asarray(leg.dest, dtype=float)
    delta = dest - start
    dist = math.hypot(*delta)
    travelled = leg.speed * (t - leg.time)
    if dist == 0.0 or travelled >= dist:
        return dest
    return start + delta * (travelled / dist)
