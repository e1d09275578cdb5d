"""Connectivity and traffic over sampled node positions.

Links follow a unit-disk model (connected iff distance <= R). Routing is a
minimum-hop stand-in: a source floods a route request across its connected
component, caches the resulting route and floods again only when a link on
that route breaks or while it has no route. Delay is analytic,
``hops * (transmission time + per-hop latency)``; a packet is lost only when
no route exists at its emission time.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FuzzyMobError

METRICS = ("node_density", "broken_links", "delivered_fraction", "routing_overhead", "end_to_end_delay")


@dataclass(frozen=True)
class ConnectivitySnapshot:
    time: float
    adjacency: np.ndarray = field(repr=False)  # n x n bool, symmetric, zero diagonal

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2

    def density(self) -> float:
        return 2.0 * self.edge_count() / self.n


def snapshot_connectivity(positions, r: float, t: float = 0.0) -> ConnectivitySnapshot:
    if not r > 0:
        raise DomainError(f"range must be positive, got {r}")
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pos[:, None, :] - pos[None, :, :]
    adj = np.hypot(diff[..., 0], diff[..., 1]) <= r
    np.fill_diagonal(adj, False)
    return ConnectivitySnapshot(float(t), adj)


def count_broken_links(snapshots: Sequence[ConnectivitySnapshot]) -> int:
    """Pairs adjacent in one snapshot and not in the next, summed over consecutive snapshots."""
    total = 0
    for prev, cur in zip(snapshots, snapshots[1:]):
        if prev.adjacency.shape != cur.adjacency.shape:
            raise FuzzyMobError("snapshots cover different node sets")
        if not cur.time > prev.time:
            raise FuzzyMobError("snapshots are not strictly time-ordered")
        total += int(np.count_nonzero(np.triu(prev.adjacency & ~cur.adjacency)))
    return total


def _bfs(snapshot: ConnectivitySnapshot, start: int) -> dict[int, int]:
    hops = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in snapshot.neighbors(u):
            v = int(v)
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def flood(snapshot: ConnectivitySnapshot, src: int) -> set[int]:
    """Nodes a route request from ``src`` reaches, ``src`` included."""
    return set(_bfs(snapshot, src))


def route(snapshot: ConnectivitySnapshot, src: int, dst: int) -> list[int] | None:
    """Minimum-hop path ``[src, ..., dst]``, or None when ``dst`` is unreachable.

    Ties go to the smallest next-hop id at every step. ``src == dst`` gives ``[]``.
    """
    n = snapshot.n
    if not (0 <= src < n and 0 <= dst < n):
        raise DomainError(f"node id out of range 0..{n - 1}")
    if src == dst:
        return []
    to_dst = _bfs(snapshot, dst)
    if src not in to_dst:
        return None
    path = [src]
    u = src
    while u != dst:
        u = next(int(v) for v in snapshot.neighbors(u) if to_dst.get(int(v)) == to_dst[u] - 1)
        path.append(u)
    return path


def hop_count(path: list[int] | None) -> int | None:
    if path is None:
        return None
    return max(len(path) - 1, 0)


@dataclass(frozen=True)
class CbrSession:
    src: int
    dst: int
    start: float
    packet_size: int = 512
    rate: float = 4.0
    max_packets: int = 6000

    def __post_init__(self):
        if self.src == self.dst:
            raise DomainError("session source and destination must differ")
        if not self.rate > 0:
            raise DomainError("session rate must be positive")

    def packets_between(self, a: float, b: float, end: float) -> int:
        """Packets emitted in ``[a, b)``, ignoring those at or after ``end`` or past the cap."""
        b = min(b, end)
        if b <= a:
            return 0
        lo = max(0, math.ceil(round((a - self.start) * self.rate, 9)))
        hi = min(self.max_packets, max(0, math.ceil(round((b - self.start) * self.rate, 9))))
        return max(0, hi - lo)


@dataclass(frozen=True)
class LinkParams:
    range_m: float = 250.0
    bandwidth_bps: float = 2e6
    hop_latency: float = 0.002


@dataclass
class MetricsReport:
    node_density: float
    broken_links: int
    delivered_fraction: float | None
    routing_overhead: int
    end_to_end_delay: float | None  # None when nothing was delivered
    sent: int = 0
    delivered: int = 0

    def metrics(self) -> dict[str, float | None]:
        d = asdict(self)
        return {m: d[m] for m in METRICS}


def run_traffic(
    times: Sequence[float],
    positions: np.ndarray,
    sessions: Iterable[CbrSession],
    link: LinkParams = LinkParams(),
    window: tuple[float, float] | None = None,
) -> MetricsReport:
    """Drive CBR sessions over position samples and collect the five metrics.

    ``positions[k]`` holds every node's position at ``times[k]``; each
    sample is a snapshot valid until the next. Metrics cover snapshots with
    time in ``window`` (default: the whole run); packets are emitted up to
    the last sample time.
    """
    times = np.asarray(times, dtype=float)
    sessions = sorted(sessions, key=lambda s: (s.start, s.src, s.dst))
    lo, hi = window if window is not None else (times[0], times[-1])
    end = float(times[-1])
    keep = [k for k, t in enumerate(times) if lo <= t <= hi]
    snaps = [snapshot_connectivity(positions[k], link.range_m, times[k]) for k in keep]

    cached: dict[int, list[int] | None] = {}
    started: set[int] = set()
    overhead = sent = delivered = 0
    hop_packets: dict[float, int] = {}  # per-hop delay -> delivered packet-hops, summed exactly
    for k, snap in zip(keep, snaps):
        t0 = times[k]
        t1 = times[k + 1] if k + 1 < len(times) else math.inf
        for i, s in enumerate(sessions):
            count = s.packets_between(max(t0, s.start), t1, end)
            if count == 0:
                continue
            path = cached.get(i)
            if i not in started or path is None or not _route_alive(snap, path):
                started.add(i)
                overhead += len(flood(snap, s.src))
                path = route(snap, s.src, s.dst)
                cached[i] = path
            sent += count
            if path is not None:
                delivered += count
                per_hop = s.packet_size * 8 / link.bandwidth_bps + link.hop_latency
                hop_packets[per_hop] = hop_packets.get(per_hop, 0) + count * (len(path) - 1)
    return MetricsReport(
        node_density=float(np.mean([s.density() for s in snaps])) if snaps else 0.0,
        broken_links=count_broken_links(snaps),
        delivered_fraction=delivered / sent if sent else None,
        routing_overhead=overhead,
        end_to_end_delay=sum(ph * (n / delivered) for ph, n in sorted(hop_packets.items())) if delivered else None,
        sent=sent,
        delivered=delivered,
    )


def _route_alive(snap: ConnectivitySnapshot, path: list[int]) -> bool:
    return all(snap.adjacency[u, v] for u, v in zip(path, path[1:]))


@dataclass(frozen=True)
class MetricSummary:
    mean: float | None
    sd: float | None
    n: int


def aggregate_runs(reports: Sequence[MetricsReport]) -> dict[str, MetricSummary]:
    """Per-metric mean and sample standard deviation; absent values are skipped."""
    if not reports:
        raise DomainError("need at least one report")
    out = {}
    for m in METRICS:
        vals = np.array([v for r in reports if (v := getattr(r, m)) is not None], dtype=float)
        if len(vals) == 0:
            out[m] = MetricSummary(None, None, 0)
        else:
            sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            out[m] = MetricSummary(float(np.mean(vals)), sd, len(vals))
    return out
