"""Centralized facility-location solvers used as a placement oracle.

Two problem flavors over a graph snapshot: pick exactly k facilities to
minimize demand-weighted distance to the nearest facility (k-median), or
pick any non-empty facility set to minimize opening costs plus the same
service term (uncapacitated facility location). Both get an exhaustive
solver for small instances and a deterministic first-improvement local
search (swap moves for k-median; add, drop and swap for UFL).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable

from .geometry import NetworkGraph, euclidean_distance, hop_distances

HOP = "hop"
EUCLIDEAN = "euclidean"

BRUTE_FORCE_MAX_NODES = 15
_IMPROVE_EPS = 1e-12


class InstanceTooLarge(ValueError):
    """Exhaustive enumeration refused for instances beyond the size cap."""


@dataclass
class FLInstance:
    graph: NetworkGraph
    demand: dict[int, float]
    metric: str = HOP
    opening_costs: dict[int, float] | None = None
    k: int | None = None
    _dist: dict[int, dict[int, float]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        nodes = set(self.graph.node_ids)
        if set(self.demand) != nodes:
            raise ValueError("demand must cover every node exactly")
        if any(v < 0 for v in self.demand.values()):
            raise ValueError("demands must be non-negative")
        if self.metric not in (HOP, EUCLIDEAN):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.k is not None and not 1 <= self.k <= len(nodes):
            raise ValueError("k must be in [1, N]")
        if self.opening_costs is not None and set(self.opening_costs) != nodes:
            raise ValueError("opening costs must cover every node exactly")

    def distance(self, a: int, b: int) -> float:
        if a not in self._dist:
            if self.metric == HOP:
                self._dist[a] = hop_distances(self.graph, [a])
            else:
                pa = self.graph.positions[a]
                self._dist[a] = {
                    b2: euclidean_distance(pa, p2) for b2, p2 in self.graph.positions.items()
                }
        return self._dist[a][b]


@dataclass(frozen=True)
class FacilitySolution:
    facilities: frozenset
    assignment: dict[int, int]
    cost: float


def assign_to_nearest(instance: FLInstance, facilities: Iterable[int]) -> dict[int, int]:
    """Map every node to its nearest open facility, ties to the smallest id."""
    fac = sorted(facilities)
    if not fac:
        raise ValueError("facility set must be non-empty")
    assignment = {}
    for v in instance.graph.node_ids:
        best = min(fac, key=lambda f: (instance.distance(v, f), f))
        assignment[v] = best
    return assignment


def kmedian_cost(instance: FLInstance, facilities: Iterable[int]) -> float:
    """Demand-weighted distance to the nearest facility, summed over nodes."""
    fac = sorted(facilities)
    if not fac:
        return math.inf
    total = 0.0
    for v in instance.graph.node_ids:
        d = min(instance.distance(v, f) for f in fac)
        if d == math.inf:
            if instance.demand[v] > 0:
                return math.inf
            continue
        total += instance.demand[v] * d
    return total


def ufl_cost(instance: FLInstance, facilities: Iterable[int]) -> float:
    fac = list(facilities)
    if not fac:
        return math.inf
    if instance.opening_costs is None:
        raise ValueError("instance has no opening costs")
    return sum(instance.opening_costs[f] for f in fac) + kmedian_cost(instance, fac)


def degree_proportional_costs(g: NetworkGraph, base: float) -> dict[int, float]:
    """Opening cost proportional to node degree (well-connected nodes
    attract more demand and are costlier to open)."""
    if base <= 0:
        raise ValueError("base must be positive")
    return {v: base * len(g.adjacency[v]) for v in g.node_ids}


def _solution(instance: FLInstance, facilities, cost) -> FacilitySolution:
    return FacilitySolution(
        facilities=frozenset(facilities),
        assignment=assign_to_nearest(instance, facilities),
        cost=cost,
    )


def brute_force(instance: FLInstance) -> FacilitySolution:
    """Globally optimal solution by enumeration. Small instances only."""
    nodes = list(instance.graph.node_ids)
    if len(nodes) > BRUTE_FORCE_MAX_NODES:
        raise InstanceTooLarge(
            f"{len(nodes)} nodes exceeds the exhaustive cap of {BRUTE_FORCE_MAX_NODES}"
        )
    best = None
    best_cost = math.inf
    if instance.k is not None:
        candidates = itertools.combinations(nodes, instance.k)
        cost_fn = kmedian_cost
    else:
        candidates = itertools.chain.from_iterable(
            itertools.combinations(nodes, r) for r in range(1, len(nodes) + 1)
        )
        cost_fn = ufl_cost
    for subset in candidates:
        c = cost_fn(instance, subset)
        if c < best_cost:
            best_cost = c
            best = subset
    return _solution(instance, best, best_cost)


def _kmedian_descent(instance: FLInstance, start: set[int]) -> tuple[set[int], float]:
    nodes = instance.graph.node_ids
    current = set(start)
    cost = kmedian_cost(instance, current)
    improved = True
    while improved:
        improved = False
        for a in sorted(current):
            for b in nodes:
                if b in current:
                    continue
                trial = (current - {a}) | {b}
                c = kmedian_cost(instance, trial)
                if c < cost - _IMPROVE_EPS:
                    current, cost = trial, c
                    improved = True
                    break
            if improved:
                break
    return current, cost


def _ufl_descent(instance: FLInstance, start: set[int]) -> tuple[set[int], float]:
    nodes = instance.graph.node_ids
    current = set(start)
    cost = ufl_cost(instance, current)
    improved = True
    while improved:
        improved = False
        moves = itertools.chain(
            (("add", None, b) for b in nodes if b not in current),
            (("drop", a, None) for a in sorted(current)),
            (
                ("swap", a, b)
                for a in sorted(current)
                for b in nodes
                if b not in current
            ),
        )
        for kind, a, b in moves:
            if kind == "add":
                trial = current | {b}
            elif kind == "drop":
                if len(current) == 1:
                    continue
                trial = current - {a}
            else:
                trial = (current - {a}) | {b}
            c = ufl_cost(instance, trial)
            if c < cost - _IMPROVE_EPS:
                current, cost = trial, c
                improved = True
                break
    return current, cost


def local_search(instance: FLInstance, seed: int = 0, restarts: int = 1) -> FacilitySolution:
    """First-improvement local search from random starts.

    Moves are scanned in fixed node-id order, so the output is fully
    determined by (instance, seed). Each restart draws a fresh random
    start; the cheapest local optimum wins.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = random.Random(seed)
    nodes = list(instance.graph.node_ids)
    best = None
    best_cost = math.inf
    for _ in range(restarts):
        if instance.k is not None:
            start = set(rng.sample(nodes, instance.k))
            sol, cost = _kmedian_descent(instance, start)
        else:
            size = rng.randint(1, len(nodes))
            start = set(rng.sample(nodes, size))
            sol, cost = _ufl_descent(instance, start)
        if cost < best_cost:
            best, best_cost = sol, cost
    return _solution(instance, best, best_cost)
