"""Replica lifecycle: workload-driven replicate/drop/handover decisions.

Each node holding a content copy counts the queries it serves during its
storage period. At period expiry it compares that count against a
reference workload: a clearly overloaded replica duplicates the copy onto
two neighbors, a clearly underloaded one discards it, and anything in
between performs a plain random-walk handover to one neighbor. A consumer
whose query ultimately fails fetches the content from the origin server
and becomes a replica itself, which is also how the replica population
regrows from zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple

from .geometry import NetworkGraph

REPLICATE = "replicate"
DROP = "drop"
HANDOVER = "handover"


@dataclass
class ReplicaState:
    """Bookkeeping for one node holding the content for one period."""

    node: int
    period_start: float
    served: int = 0


@dataclass
class ReplicationParams:
    storage_time: float
    ref_workload: float
    tolerance: float

    def __post_init__(self):
        if self.storage_time <= 0:
            raise ValueError("storage_time must be positive")
        if self.ref_workload < 0:
            raise ValueError("ref_workload must be non-negative")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass
class ReplicaSet:
    """Current replica holders, at most one copy per node."""

    states: dict[int, ReplicaState] = field(default_factory=dict)

    def add(self, state: ReplicaState) -> None:
        if state.node in self.states:
            raise ValueError(f"node {state.node} already holds a replica")
        self.states[state.node] = state

    def remove(self, node: int) -> ReplicaState:
        return self.states.pop(node)

    def holds(self, node: int) -> bool:
        return node in self.states

    def nodes(self) -> frozenset:
        return frozenset(self.states)

    def __len__(self):
        return len(self.states)


def decide(served: int, ref_workload: float, tolerance: float) -> str:
    """Period-end decision from the measured served-query count."""
    gap = served - ref_workload
    if gap > tolerance:
        return REPLICATE
    if gap < -tolerance:
        return DROP
    return HANDOVER


def rwd_target(g: NetworkGraph, node: int, rng: random.Random, exclude=frozenset()):
    """Uniformly drawn neighbor to receive the copy, or None if no
    eligible neighbor exists."""
    eligible = sorted(g.adjacency[node] - set(exclude))
    if not eligible:
        return None
    return rng.choice(eligible)


class ExpiryOutcome(NamedTuple):
    decision: str
    next_holders: tuple[int, ...]


def on_period_expiry(
    state: ReplicaState,
    g: NetworkGraph,
    params: ReplicationParams,
    rng: random.Random,
    occupied=frozenset(),
) -> ExpiryOutcome:
    """Resolve a storage-period expiry into the copy's next holders.

    Returns the decision together with the nodes holding a copy for the
    next period: empty on drop, one node on handover, two on a successful
    replication. Nodes in ``occupied`` already hold a copy and are never
    selected; when no eligible neighbor remains the copy stays where it is
    (a drop still applies). A replicating node with a single eligible
    neighbor hands one copy over and keeps the other.
    """
    decision = decide(state.served, params.ref_workload, params.tolerance)
    if decision == DROP:
        return ExpiryOutcome(DROP, ())
    eligible = sorted(g.adjacency[state.node] - set(occupied))
    if decision == HANDOVER:
        if not eligible:
            return ExpiryOutcome(HANDOVER, (state.node,))
        return ExpiryOutcome(HANDOVER, (rng.choice(eligible),))
    # replicate
    if not eligible:
        return ExpiryOutcome(REPLICATE, (state.node,))
    if len(eligible) == 1:
        return ExpiryOutcome(REPLICATE, (eligible[0], state.node))
    pair = rng.sample(eligible, 2)
    return ExpiryOutcome(REPLICATE, tuple(pair))


def on_query_miss(replicas: ReplicaSet, consumer: int, now: float) -> ReplicaState:
    """Server-fetch path: a failed consumer becomes a fresh replica."""
    if replicas.holds(consumer):
        raise ValueError(f"node {consumer} already holds a replica")
    state = ReplicaState(node=consumer, period_start=now, served=0)
    replicas.add(state)
    return state


def target_replica_count(n_nodes: int, rate: float, storage_time: float, ref_workload: float) -> float:
    """Replica count at which per-replica load meets the reference workload.

    Balances the aggregate consumer demand against the serving capacity
    each replica is willing to offer per storage period.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    denom = rate * storage_time + ref_workload
    if denom <= 0:
        raise ValueError("rate*storage_time + ref_workload must be positive")
    return n_nodes * rate * storage_time / denom


def opening_cost(served: float, ref_workload: float) -> float:
    """Facility-opening cost of a replica: its workload imbalance."""
    return abs(served - ref_workload)
