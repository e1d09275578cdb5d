"""City map: sites, the road graph and shortest paths over it.

Map files are plain text split into sections::

    # comments start with '#'
    [area]
    10000,10000
    [vertices]
    # id,x,y
    0,0,0
    1,500,0
    [edges]
    # u,v   (length is the Euclidean distance, never stored)
    0,1
    [sites]
    # id,name,x,y,anchor_vertex
    1,Emergency,7500,6500,358

``[area]`` is optional and defaults to 10000 x 10000 m.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ConnectivityError,
    DanglingAnchorError,
    DuplicateKeyError,
    MalformedFileError,
    NoPathError,
    UnknownKeyError,
)

DEFAULT_AREA = (10000.0, 10000.0)
BUNDLED_MAP = "paper_city.map"

Point = tuple[float, float]


def euclidean_distance(p1: Sequence[float], p2: Sequence[float]) -> float:
    return math.hypot(p2[0] - p1[0], p2[1] - p1[1])


@dataclass(frozen=True)
class Site:
    id: int
    name: str
    center: Point
    anchor_vertex: int


class PathGraph:
    """Undirected road graph with Euclidean edge lengths.

    Treated as immutable once built; shortest-path distance tables are
    cached per target vertex.
    """

    def __init__(self, vertices: Iterable[tuple[int, float, float]], edges: Iterable[tuple[int, int]]):
        self.coords: dict[int, Point] = {}
        for vid, x, y in vertices:
            if vid in self.coords:
                raise DuplicateKeyError("duplicate vertex", key=f"vertex {vid}")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ConfigError("non-finite coordinate", key=f"vertex {vid}")
            self.coords[vid] = (float(x), float(y))
        self.adj: dict[int, dict[int, float]] = {v: {} for v in self.coords}
        self.edges: list[tuple[int, int, float]] = []
        for u, v in edges:
            for end in (u, v):
                if end not in self.coords:
                    raise UnknownKeyError("edge endpoint is not a vertex", key=f"edge ({u},{v})")
            if u == v:
                raise ConfigError("self-loop", key=f"edge ({u},{v})")
            if v in self.adj[u]:
                raise DuplicateKeyError("duplicate edge", key=f"edge ({u},{v})")
            length = euclidean_distance(self.coords[u], self.coords[v])
            if length <= 0.0:
                raise ConfigError("zero-length edge", key=f"edge ({u},{v})")
            self.adj[u][v] = length
            self.adj[v][u] = length
            self.edges.append((u, v, length))
        self._dist_cache: dict[int, dict[int, float]] = {}

    @property
    def vertices(self) -> list[int]:
        return sorted(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def check_connected(self) -> None:
        if not self.coords:
            raise ConfigError("graph has no vertices", key="vertices")
        start = min(self.coords)
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(self.coords):
            missing = min(set(self.coords) - seen)
            raise ConnectivityError("graph is disconnected", key=f"vertex {missing}")

    def distances_to(self, target: int) -> dict[int, float]:
        """Dijkstra from ``target``; returns metric distance of every reachable vertex."""
        cached = self._dist_cache.get(target)
        if cached is not None:
            return cached
        if target not in self.coords:
            raise UnknownKeyError("unknown vertex", key=f"vertex {target}")
        dist = {target: 0.0}
        heap = [(0.0, target)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        self._dist_cache[target] = dist
        return dist

    def shortest_path(self, src: int, dst: int) -> tuple[list[int], float]:
        """Minimum-length path from ``src`` to ``dst``.

        Among equal-length paths the lexicographically smallest vertex
        sequence is returned: walking forward from ``src``, always step to
        the smallest-id neighbor that still lies on some shortest path.
        """
        if src not in self.coords:
            raise UnknownKeyError("unknown vertex", key=f"vertex {src}")
        dist = self.distances_to(dst)
        if src not in dist:
            raise NoPathError(f"no path from {src} to {dst}")
        path = [src]
        u = src
        while u != dst:
            du = dist[u]
            tol = 1e-9 * max(1.0, du)
            for v in sorted(self.adj[u]):
                dv = dist.get(v)
                if dv is not None and abs(self.adj[u][v] + dv - du) <= tol and dv < du:
                    path.append(v)
                    u = v
                    break
            else:  # pragma: no cover - unreachable with consistent distances
                raise NoPathError(f"lost the shortest path at vertex {u}")
        return path, dist[src]

    def nearest_vertex(self, p: Sequence[float]) -> int:
        return min(self.coords, key=lambda v: (euclidean_distance(p, self.coords[v]), v))

    def distance_to_graph(self, p: Sequence[float]) -> float:
        """Distance from ``p`` to the closest point on any edge."""
        seg = self._segments()
        a, b = seg[:, 0:2], seg[:, 2:4]
        ab = b - a
        q = np.asarray(p, dtype=float)
        s = np.clip(np.einsum("ij,ij->i", q - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        proj = a + s[:, None] * ab
        return float(np.min(np.hypot(*(q - proj).T)))

    def _segments(self) -> np.ndarray:
        if not hasattr(self, "_seg"):
            self._seg = np.array(
                [(*self.coords[u], *self.coords[v]) for u, v, _ in self.edges], dtype=float
            )
        return self._seg


@dataclass(frozen=True)
class DistanceMatrix:
    site_ids: tuple[int, ...]
    d: np.ndarray = field(repr=False)

    @classmethod
    def from_sites(cls, sites: Sequence[Site]) -> "DistanceMatrix":
        pts = np.array([s.center for s in sites], dtype=float)
        diff = pts[:, None, :] - pts[None, :, :]
        return cls(tuple(s.id for s in sites), np.hypot(diff[..., 0], diff[..., 1]))

    @property
    def max_dis(self) -> float:
        return float(self.d.max())

    def between(self, a: int, b: int) -> float:
        return float(self.d[self.site_ids.index(a), self.site_ids.index(b)])


@dataclass(frozen=True)
class Environment:
    graph: PathGraph
    sites: tuple[Site, ...]
    area: tuple[float, float] = DEFAULT_AREA

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {s.name: s for s in self.sites})
        object.__setattr__(self, "_by_id", {s.id: s for s in self.sites})
        object.__setattr__(self, "distances", DistanceMatrix.from_sites(self.sites))

    def site(self, key) -> Site:
        """Look a site up by id or name."""
        table = self._by_id if isinstance(key, (int, np.integer)) else self._by_name
        try:
            return table[key]
        except KeyError:
            raise UnknownKeyError("unknown site", key=str(key)) from None

    @property
    def site_names(self) -> list[str]:
        return [s.name for s in self.sites]

    @property
    def site_centers(self) -> dict[str, Point]:
        return {s.name: s.center for s in self.sites}

    @property
    def max_dis(self) -> float:
        return self.distances.max_dis


def nearest_site(p: Sequence[float], sites: Sequence[Site]) -> Site:
    """Site whose center is closest to ``p``; ties go to the smaller id."""
    if not sites:
        raise ConfigError("empty site list", key="sites")
    return min(sites, key=lambda s: (euclidean_distance(p, s.center), s.id))


def _parse_sections(text: str, source: str) -> dict[str, list[tuple[int, list[str]]]]:
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise MalformedFileError("section repeated", key=f"{source}:{lineno}")
            sections[current] = []
            continue
        if current is None:
            raise MalformedFileError("data before the first section header", key=f"{source}:{lineno}")
        sections[current].append((lineno, [f.strip() for f in line.split(",")]))
    return sections


def _fields(row, n, source, lineno):
    if len(row) != n:
        raise MalformedFileError(f"expected {n} fields, got {len(row)}", key=f"{source}:{lineno}")
    return row


def parse_map(text: str, source: str = "<map>") -> Environment:
    sections = _parse_sections(text, source)
    for name in ("vertices", "edges", "sites"):
        if name not in sections:
            raise MalformedFileError(f"missing [{name}] section", key=source)
    unknown = set(sections) - {"area", "vertices", "edges", "sites"}
    if unknown:
        raise UnknownKeyError("unknown section", key=f"{source}:[{sorted(unknown)[0]}]")
    try:
        area = DEFAULT_AREA
        if "area" in sections:
            rows = sections["area"]
            if len(rows) != 1:
                raise MalformedFileError("[area] takes one row", key=source)
            lineno, row = rows[0]
            w, h = _fields(row, 2, source, lineno)
            area = (float(w), float(h))
        vertices = []
        for lineno, row in sections["vertices"]:
            vid, x, y = _fields(row, 3, source, lineno)
            vertices.append((int(vid), float(x), float(y)))
        edges = []
        for lineno, row in sections["edges"]:
            u, v = _fields(row, 2, source, lineno)
            edges.append((int(u), int(v)))
        raw_sites = []
        for lineno, row in sections["sites"]:
            sid, name, x, y, anchor = _fields(row, 5, source, lineno)
            raw_sites.append((int(sid), name, float(x), float(y), int(anchor)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise MalformedFileError(str(exc), key=source) from None

    graph = PathGraph(vertices, edges)
    graph.check_connected()
    sites = []
    seen_ids, seen_names = set(), set()
    for sid, name, x, y, anchor in raw_sites:
        if sid in seen_ids or name in seen_names:
            raise DuplicateKeyError("duplicate site", key=f"site {name}")
        seen_ids.add(sid)
        seen_names.add(name)
        if anchor not in graph.coords:
            raise DanglingAnchorError(f"anchor vertex {anchor} does not exist", key=f"site {name}")
        if not (0 <= x <= area[0] and 0 <= y <= area[1]):
            raise ConfigError("site center outside the area", key=f"site {name}")
        sites.append(Site(sid, name, (x, y), anchor))
    if not sites:
        raise ConfigError("map defines no sites", key=f"{source}:[sites]")
    sites.sort(key=lambda s: s.id)
    return Environment(graph, tuple(sites), area)


def load_map(path: str | Path | None = None) -> Environment:
    """Load and validate a map file; ``None`` loads the bundled paper_city map."""
    if path is None:
        text = resources.files("fuzzymob.data").joinpath(BUNDLED_MAP).read_text()
        return parse_map(text, BUNDLED_MAP)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read map file ({exc.strerror})", key=str(path)) from None
    return parse_map(text, str(path))


def format_map(env: Environment) -> str:
    lines = ["[area]", f"{env.area[0]:g},{env.area[1]:g}", "[vertices]", "# id,x,y"]
    lines += [f"{v},{x:g},{y:g}" for v, (x, y) in sorted(env.graph.coords.items())]
    lines += ["[edges]", "# u,v"]
    lines += [f"{u},{v}" for u, v, _ in env.graph.edges]
    lines += ["[sites]", "# id,name,x,y,anchor_vertex"]
    lines += [f"{s.id},{s.name},{s.center[0]:g},{s.center[1]:g},{s.anchor_vertex}" for s in env.sites]
    return "\n".join(lines) + "\n"


def grid_environment(
    site_specs: Sequence[tuple[int, str, float, float]],
    block: float = 500.0,
    area: tuple[float, float] = DEFAULT_AREA,
) -> Environment:
    """Manhattan grid of square blocks with each site anchored at its nearest vertex."""
    nx = int(round(area[0] / block)) + 1
    ny = int(round(area[1] / block)) + 1
    vertices = [(j * nx + i, i * block, j * block) for j in range(ny) for i in range(nx)]
    edges = []
    for j in range(ny):
        for i in range(nx):
            v = j * nx + i
            if i + 1 < nx:
                edges.append((v, v + 1))
            if j + 1 < ny:
                edges.append((v, v + nx))
    graph = PathGraph(vertices, edges)
    sites = tuple(
        Site(sid, name, (float(x), float(y)), graph.nearest_vertex((x, y)))
        for sid, name, x, y in site_specs
    )
    return Environment(graph, sites, area)
