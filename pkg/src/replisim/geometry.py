"""Planar geometry and unit-disk connectivity for node deployments.

Nodes live on a rectangular area. Two nodes are linked whenever their
euclidean distance is at most the radio range (ties count as connected).
Angular sectors support directional query propagation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, TextIO

TWO_PI = 2.0 * math.pi


class Position(NamedTuple):
    x: float
    y: float


class Area(NamedTuple):
    """Rectangular deployment area with its lower-left corner at the origin."""

    width: float
    height: float

    def contains(self, p) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def euclidean_distance(a, b) -> float:
    """Distance between two points given as (x, y) pairs."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Sector:
    """Angular slice anchored at ``origin``.

    Angles are measured counterclockwise from the positive x axis, in
    radians. The sector covers [start_angle, start_angle + width), with
    wraparound past 2*pi.
    """

    origin: Position
    start_angle: float
    width: float

    def __post_init__(self):
        if not 0.0 < self.width <= TWO_PI:
            raise ValueError("sector width must be in (0, 2*pi]")


def in_sector(sector: Sector, p) -> bool:
    """True when point ``p`` falls inside the sector.

    The sector origin itself is trivially inside (the querying node is
    never excluded by its own angular constraint).
    """
    dx = p[0] - sector.origin[0]
    dy = p[1] - sector.origin[1]
    if dx == 0.0 and dy == 0.0:
        return True
    angle = math.atan2(dy, dx) % TWO_PI
    rel = (angle - sector.start_angle) % TWO_PI
    if rel >= TWO_PI:  # float rounding of the modulo at the wrap point
        rel = 0.0
    return rel < sector.width


class NetworkGraph:
    """Immutable snapshot of node positions and unit-disk adjacency."""

    __slots__ = ("node_ids", "positions", "radio_range", "adjacency")

    def __init__(self, node_ids, positions, radio_range, adjacency):
        self.node_ids = tuple(node_ids)
        self.positions = dict(positions)
        self.radio_range = float(radio_range)
        self.adjacency = {i: frozenset(adjacency[i]) for i in self.node_ids}

    def neighbors(self, node: int) -> frozenset:
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def __len__(self):
        return len(self.node_ids)

    def __repr__(self):
        n_edges = sum(len(s) for s in self.adjacency.values()) // 2
        return f"NetworkGraph(n={len(self.node_ids)}, edges={n_edges}, range={self.radio_range})"


def build_graph(positions, radio_range: float, area: Area | None = None) -> NetworkGraph:
    """Build the unit-disk graph over the given node positions.

    ``positions`` is either a mapping node_id -> (x, y) or an iterable of
    (node_id, (x, y)) pairs. An edge exists iff the euclidean distance is
    <= radio_range. Duplicate node ids are rejected; so are positions
    outside ``area`` when an area is given.

    Neighbor candidates are found through a grid hash with cell size equal
    to the radio range, so only the 9 surrounding cells are scanned per
    node instead of all pairs.
    """
    if radio_range <= 0:
        raise ValueError("radio_range must be positive")
    if isinstance(positions, Mapping):
        items = list(positions.items())
    else:
        items = list(positions)
    pos = {}
    for node, p in items:
        if node in pos:
            raise ValueError(f"duplicate node id {node}")
        p = Position(float(p[0]), float(p[1]))
        if area is not None and not area.contains(p):
            raise ValueError(f"node {node} at {p} lies outside the area")
        pos[node] = p

    node_ids = sorted(pos)
    inv_cell = 1.0 / radio_range
    grid: dict[tuple[int, int], list[int]] = {}
    for node in node_ids:
        p = pos[node]
        key = (int(p.x * inv_cell), int(p.y * inv_cell))
        grid.setdefault(key, []).append(node)

    r2 = radio_range * radio_range
    adjacency = {i: set() for i in node_ids}
    for (cx, cy), members in grid.items():
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                others = grid.get((cx + ox, cy + oy))
                if not others:
                    continue
                for i in members:
                    pi = pos[i]
                    for j in others:
                        if j <= i:
                            continue
                        pj = pos[j]
                        dx = pi.x - pj.x
                        dy = pi.y - pj.y
                        if dx * dx + dy * dy <= r2:
                            adjacency[i].add(j)
                            adjacency[j].add(i)
    return NetworkGraph(node_ids, pos, radio_range, adjacency)


def hop_distances(g: NetworkGraph, sources: Iterable[int]) -> dict[int, float]:
    """Hop count from every node to the nearest source (multi-source BFS).

    Sources are at distance 0; unreachable nodes get ``math.inf``. An empty
    source set yields all infinities.
    """
    sources = set(sources)
    unknown = sources - set(g.node_ids)
    if unknown:
        raise ValueError(f"sources not in graph: {sorted(unknown)}")
    dist = {i: math.inf for i in g.node_ids}
    queue = deque()
    for s in sorted(sources):
        dist[s] = 0
        queue.append(s)
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in g.adjacency[u]:
            if dist[v] == math.inf:
                dist[v] = du
                queue.append(v)
    return dist


# ---------------------------------------------------------------------------
# Edge-list file format
#
#   N range
#   id x y        (N lines)
#   i j           (one line per undirected edge)
#   demand id v   (optional, for the facility solver)
#   cost id v     (optional, for the facility solver)
#
# Blank lines and lines starting with '#' are ignored.
# ---------------------------------------------------------------------------


@dataclass
class GraphFile:
    graph: NetworkGraph
    demand: dict[int, float] = field(default_factory=dict)
    costs: dict[int, float] = field(default_factory=dict)


class GraphFormatError(ValueError):
    """Raised when an edge-list file cannot be parsed."""


def write_edge_list(g: NetworkGraph, out: TextIO, demand=None, costs=None) -> None:
    out.write(f"{len(g.node_ids)} {g.radio_range!r}\n")
    for i in g.node_ids:
        p = g.positions[i]
        out.write(f"{i} {p.x!r} {p.y!r}\n")
    for i in g.node_ids:
        for j in sorted(g.adjacency[i]):
            if i < j:
                out.write(f"{i} {j}\n")
    for i, v in sorted((demand or {}).items()):
        out.write(f"demand {i} {v!r}\n")
    for i, v in sorted((costs or {}).items()):
        out.write(f"cost {i} {v!r}\n")


def read_edge_list(inp: TextIO) -> GraphFile:
    lines = [
        (no, line.strip())
        for no, line in enumerate(inp, start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise GraphFormatError("empty graph file")

    def fail(no, msg):
        raise GraphFormatError(f"line {no}: {msg}")

    no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        fail(no, "expected header 'N range'")
    try:
        n = int(parts[0])
        radio_range = float(parts[1])
    except ValueError:
        fail(no, "expected header 'N range'")
    if len(lines) < 1 + n:
        raise GraphFormatError(f"expected {n} node lines, found {len(lines) - 1}")

    positions = {}
    for no, line in lines[1 : 1 + n]:
        parts = line.split()
        if len(parts) != 3:
            fail(no, "expected 'id x y'")
        try:
            node = int(parts[0])
            p = (float(parts[1]), float(parts[2]))
        except ValueError:
            fail(no, "expected 'id x y'")
        if node in positions:
            fail(no, f"duplicate node id {node}")
        positions[node] = p

    adjacency = {i: set() for i in positions}
    demand: dict[int, float] = {}
    costs: dict[int, float] = {}
    for no, line in lines[1 + n :]:
        parts = line.split()
        if parts[0] in ("demand", "cost"):
            if len(parts) != 3:
                fail(no, f"expected '{parts[0]} id value'")
            try:
                node = int(parts[1])
                value = float(parts[2])
            except ValueError:
                fail(no, f"expected '{parts[0]} id value'")
            if node not in positions:
                fail(no, f"unknown node id {node}")
            (demand if parts[0] == "demand" else costs)[node] = value
            continue
        if len(parts) != 2:
            fail(no, "expected edge 'i j'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            fail(no, "expected edge 'i j'")
        if i not in positions or j not in positions:
            fail(no, f"edge references unknown node: {i} {j}")
        if i == j:
            fail(no, "self-loops are not allowed")
        adjacency[i].add(j)
        adjacency[j].add(i)

    graph = NetworkGraph(sorted(positions), positions, radio_range, adjacency)
    return GraphFile(graph=graph, demand=demand, costs=costs)
