"""Content query propagation and reply backtracking.

Four ways for a consumer to look for the content:

* flood: application-layer broadcast, dropped after a maximum hop count;
  every replica reached serves the query.
* flood_selective: same propagation, but a replica reached h hops away
  only replies with probability 1/h to deflate redundant workload.
* scan: the query carries an angular sector anchored at the consumer and
  only nodes inside it rebroadcast; sectors are tried round-robin until
  one yields a reply.
* perfect: an oracle names the euclidean-closest replica, the query is
  broadcast and every other replica discards it.

Replies retrace the recorded relay path hop by hop; no routing protocol
is involved. Relays suppress duplicate copies of a query through
(origin, sequence-number) bookkeeping.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

from .geometry import NetworkGraph, Sector, euclidean_distance, in_sector

TWO_PI = 2.0 * math.pi

FLOOD = "flood"
FLOOD_SELECTIVE = "flood_selective"
SCAN = "scan"
PERFECT = "perfect"
MODES = (FLOOD, FLOOD_SELECTIVE, SCAN, PERFECT)


@dataclass
class LinkLayer:
    """Abstract lossy link: fixed per-hop delay, independent per-hop loss."""

    per_hop_delay: float = 0.005
    per_hop_loss: float = 0.0
    rng: random.Random = field(default_factory=random.Random)

    def __post_init__(self):
        if self.per_hop_delay <= 0:
            raise ValueError("per_hop_delay must be positive")
        if not 0.0 <= self.per_hop_loss < 1.0:
            raise ValueError("per_hop_loss must be in [0, 1)")

    def transmit(self) -> bool:
        if self.per_hop_loss == 0.0:
            return True
        return self.rng.random() >= self.per_hop_loss


class DedupCache:
    """Per-node memory of already-processed (origin, seq) query keys."""

    def __init__(self):
        self._seen: dict[int, set] = {}

    def record(self, node: int, key) -> bool:
        """Mark key as seen by node; False when it was a duplicate."""
        seen = self._seen.setdefault(node, set())
        if key in seen:
            return False
        seen.add(key)
        return True

    def is_duplicate(self, node: int, key) -> bool:
        return key in self._seen.get(node, ())


@dataclass
class Query:
    origin: int
    seq: int
    mode: str
    issued_at: float
    relay_path: list[int] = field(default_factory=list)
    sector: Sector | None = None
    target_replica: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown access mode {self.mode!r}")
        if (self.sector is not None) != (self.mode == SCAN):
            raise ValueError("sector is required exactly for scan queries")
        if (self.target_replica is not None) != (self.mode == PERFECT):
            raise ValueError("target_replica is required exactly for perfect queries")

    @property
    def hops_traversed(self) -> int:
        return len(self.relay_path)

    @property
    def key(self):
        return (self.origin, self.seq)


@dataclass
class Reply:
    query_key: tuple
    replica: int
    reverse_path: list[int]
    served_at: float

    def __post_init__(self):
        if len(self.reverse_path) < 2:
            raise ValueError("reverse path must reach back to the origin")
        if self.reverse_path[0] != self.replica:
            raise ValueError("reverse path must start at the serving replica")


class ReplicaHit(NamedTuple):
    replica: int
    hops: int
    path: tuple[int, ...]  # relays plus the replica itself, origin excluded


def selective_reply_probability(hop_count: int) -> float:
    """Reply probability for a replica hit ``hop_count`` hops away: 1/h."""
    if hop_count < 1:
        raise ValueError("hop_count must be >= 1; local hits are served directly")
    return 1.0 / hop_count


def propagate(
    neighbors: Callable[[int], Sequence[int]],
    origin: int,
    replicas,
    max_hops: int,
    transmit: Callable[[], bool],
    allowed: Callable[[int], bool] | None = None,
    stop_at: int | None = None,
    seen=None,
):
    """Breadth-first broadcast with duplicate suppression and losses.

    Nodes rebroadcast a query once; replica nodes absorb it instead of
    forwarding. Each directed transmission is independently lost via
    ``transmit``. ``allowed`` filters receivers (sector constraint); the
    origin is exempt. With ``stop_at`` the expansion ends after the level
    on which that node received the query.

    Returns (hits, parents): replicas reached with their hop level, and
    the predecessor map for path reconstruction.
    """
    if seen is None:
        seen = {origin}
    else:
        seen.add(origin)
    parents: dict[int, int] = {}
    hits: list[tuple[int, int]] = []
    frontier = [origin]
    for level in range(1, max_hops + 1):
        nxt = []
        for u in frontier:
            for v in neighbors(u):
                if v in seen:
                    continue
                if not transmit():
                    continue
                if allowed is not None and not allowed(v):
                    continue
                seen.add(v)
                parents[v] = u
                if v in replicas:
                    hits.append((v, level))
                else:
                    nxt.append(v)
        if not nxt or (stop_at is not None and stop_at in seen):
            break
        frontier = nxt
    return hits, parents


def path_from_parents(parents: dict[int, int], origin: int, node: int) -> tuple[int, ...]:
    """Relay path origin -> node (origin excluded, node included)."""
    path = [node]
    while path[-1] != origin:
        path.append(parents[path[-1]])
    path.pop()  # drop the origin
    path.reverse()
    return tuple(path)


def flood_query(
    g: NetworkGraph,
    replicas,
    query: Query,
    max_hops: int,
    link: LinkLayer,
    cache: DedupCache | None = None,
) -> list[ReplicaHit]:
    """Every replica reached by a scoped broadcast of ``query``.

    The serving decision (selective reply, perfect-discovery target
    filtering) is the caller's business; this returns raw reachability.
    """
    if cache is None:
        cache = DedupCache()
    replica_set = set(replicas)
    allowed = None
    if query.sector is not None:
        sector = query.sector
        allowed = lambda v: in_sector(sector, g.positions[v])

    key = query.key
    seen = _CacheSeen(cache, key)
    hits, parents = propagate(
        lambda u: sorted(g.adjacency[u]),
        query.origin,
        replica_set,
        max_hops,
        link.transmit,
        allowed=allowed,
        seen=seen,
    )
    hits.sort(key=lambda h: (h[1], h[0]))
    return [
        ReplicaHit(replica=r, hops=h, path=path_from_parents(parents, query.origin, r))
        for r, h in hits
    ]


class _CacheSeen:
    """Set-like view of one query key inside a DedupCache."""

    __slots__ = ("cache", "key")

    def __init__(self, cache: DedupCache, key):
        self.cache = cache
        self.key = key

    def __contains__(self, node):
        return self.cache.is_duplicate(node, self.key)

    def add(self, node):
        self.cache.record(node, self.key)


def make_reply(query: Query, hit: ReplicaHit, served_at: float) -> Reply:
    """Reply whose reverse path retraces the query's relay path."""
    reverse = [hit.replica] + list(reversed(hit.path[:-1])) + [query.origin]
    return Reply(query_key=query.key, replica=hit.replica, reverse_path=reverse, served_at=served_at)


class BacktrackOutcome(NamedTuple):
    delivered: bool
    latency: float  # transit time when delivered, time until loss otherwise


def backtrack_reply(g: NetworkGraph, reply: Reply, link: LinkLayer) -> BacktrackOutcome:
    """Walk the reverse path hop by hop over the given graph snapshot.

    The reply dies when two consecutive relays are no longer within radio
    range (the network moved since the query passed) or a per-hop loss
    fires.
    """
    r = g.radio_range
    elapsed = 0.0
    for u, v in zip(reply.reverse_path, reply.reverse_path[1:]):
        if euclidean_distance(g.positions[u], g.positions[v]) > r:
            return BacktrackOutcome(False, elapsed)
        if not link.transmit():
            return BacktrackOutcome(False, elapsed)
        elapsed += link.per_hop_delay
    return BacktrackOutcome(True, elapsed)


def perfect_discovery_target(g: NetworkGraph, replicas, consumer: int) -> int:
    """Euclidean-closest replica to the consumer, ties to the smallest id."""
    replicas = sorted(replicas)
    if not replicas:
        raise ValueError("no replica exists")
    pc = g.positions[consumer]
    return min(replicas, key=lambda r: (euclidean_distance(pc, g.positions[r]), r))


class ScanEntry(NamedTuple):
    sector: Sector
    deadline: float  # relative to the query's first transmission


def scan_schedule(
    sectors: int,
    sector_timeout: float,
    max_rounds: int,
    start_angle: float = 0.0,
    origin=(0.0, 0.0),
) -> list[ScanEntry]:
    """Round-robin visit order over ``sectors`` equal slices of the circle.

    Each entry is granted ``sector_timeout`` seconds; the full sweep is
    repeated ``max_rounds`` times. Sector origins are re-anchored at the
    consumer's current position when an entry is actually issued.
    """
    if sectors < 1:
        raise ValueError("need at least one sector")
    if sector_timeout <= 0 or max_rounds < 1:
        raise ValueError("sector_timeout must be positive and max_rounds >= 1")
    width = TWO_PI / sectors
    entries = []
    n = 0
    for _ in range(max_rounds):
        for s in range(sectors):
            n += 1
            entries.append(
                ScanEntry(
                    sector=Sector(origin=origin, start_angle=(start_angle + s * width) % TWO_PI, width=width),
                    deadline=n * sector_timeout,
                )
            )
    return entries


class ScanOutcome(NamedTuple):
    solved: bool
    replica: int | None
    latency: float


def scan_query(
    g: NetworkGraph,
    replicas,
    consumer: int,
    schedule: Sequence[ScanEntry],
    max_hops: int,
    link: LinkLayer,
    seq_start: int = 0,
) -> ScanOutcome:
    """Run a scan over a fixed graph snapshot, stopping at the first reply.

    Every entry issues a fresh sector-constrained query; all replicas the
    query reaches send a reply, and the earliest delivered one solves the
    query. When an entry yields nothing, the next sector starts at that
    entry's deadline.
    """
    origin_pos = g.positions[consumer]
    for idx, entry in enumerate(schedule):
        started = schedule[idx - 1].deadline if idx > 0 else 0.0
        sector = replace(entry.sector, origin=origin_pos)
        query = Query(origin=consumer, seq=seq_start + idx, mode=SCAN, issued_at=started, sector=sector)
        hits = flood_query(g, replicas, query, max_hops, link)
        best = None
        for hit in hits:
            reply = make_reply(query, hit, served_at=started + hit.hops * link.per_hop_delay)
            outcome = backtrack_reply(g, reply, link)
            if outcome.delivered:
                arrival = reply.served_at + outcome.latency
                if best is None or arrival < best[1]:
                    best = (hit.replica, arrival)
        if best is not None:
            return ScanOutcome(True, best[0], best[1])
    return ScanOutcome(False, None, schedule[-1].deadline if schedule else 0.0)


RETRY = "retry"
GIVE_UP = "give_up"
DONE = "done"


def retry_controller(mode: str, outcomes: Sequence[bool], max_attempts: int = 5) -> str:
    """Next action after the given per-attempt outcomes.

    Flood and perfect queries are reissued on a fixed timeout up to
    ``max_attempts`` total tries. One scan already sweeps all sectors
    repeatedly, so a failed scan is final.
    """
    if any(outcomes):
        return DONE
    if mode == SCAN:
        return GIVE_UP if len(outcomes) >= 1 else RETRY
    return RETRY if len(outcomes) < max_attempts else GIVE_UP
