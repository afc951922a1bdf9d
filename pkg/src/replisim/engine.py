"""Deterministic discrete-event simulation loop.

One run ties together a mobility trace, the query protocols and the
replication mechanism. All randomness flows from named sub-seeds derived
from the run seed, so a (config, seed) pair reproduces a run bit-exactly.
Events at equal times are ordered by a fixed kind priority (period
expiries resolve before new queries, which resolve before in-flight
protocol steps) and then by scheduling order.
"""

from __future__ import annotations

import hashlib
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush
from typing import NamedTuple

import numpy as np

from . import access, replication, stats
from .config import DemandPhase, SimConfig
from .geometry import Area, Position
from .mobility import MobilityTrace, generate_trace, static_trace

TWO_PI = 2.0 * math.pi

QUERY_ISSUE = "query_issue"
HOP_FORWARD = "hop_forward"
REPLY_HOP = "reply_hop"
SECTOR_TIMEOUT = "sector_timeout"
ATTEMPT_TIMEOUT = "attempt_timeout"
PERIOD_EXPIRY = "period_expiry"
SNAPSHOT = "snapshot"
DEMAND_SWITCH = "demand_switch"

EVENT_PRIORITY = {
    DEMAND_SWITCH: 0,
    PERIOD_EXPIRY: 1,
    QUERY_ISSUE: 2,
    HOP_FORWARD: 3,
    REPLY_HOP: 3,
    SECTOR_TIMEOUT: 4,
    ATTEMPT_TIMEOUT: 5,
    SNAPSHOT: 6,
}


class Event(NamedTuple):
    time: float
    priority: int
    seq: int
    kind: str
    payload: object


def derive_seed(root_seed: int, name: str) -> int:
    """Stable per-subsystem seed derived from the run seed."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class QueryRecord(NamedTuple):
    t_issue: float
    origin: int
    mode: str
    outcome: str  # solved | unsolved | canceled | pending
    latency: float | None
    replies: int
    hops: int | None


class DecisionRecord(NamedTuple):
    t: float
    node: int
    served: int
    decision: str
    replicas_after: int


class WorkloadRecord(NamedTuple):
    t: float
    node: int
    served: int


@dataclass
class PhaseConvergence:
    start: float
    rate: float
    target: float | None
    time: float | None


@dataclass
class RunResult:
    seed: int
    snapshots: list[stats.SnapshotMetrics]
    queries: list[QueryRecord]
    workload: list[WorkloadRecord]
    decisions: list[DecisionRecord]
    access: stats.AccessMetrics | None
    convergence: list[PhaseConvergence]


@dataclass
class BatchResult:
    config: SimConfig
    seeds: list[int]
    runs: list[RunResult]

    def mean_replica_series(self) -> list[tuple[float, float]]:
        """Replica count averaged across runs, per snapshot time."""
        by_t: dict[float, list[int]] = {}
        for run in self.runs:
            for snap in run.snapshots:
                by_t.setdefault(snap.t, []).append(snap.replica_count)
        return [(t, sum(v) / len(v)) for t, v in sorted(by_t.items())]

    def mean_solving_ratio(self) -> float | None:
        ratios = [r.access.solving_ratio for r in self.runs if r.access is not None]
        if not ratios:
            return None
        return sum(ratios) / len(ratios)


# ---------------------------------------------------------------------------
# Fast position / topology access
# ---------------------------------------------------------------------------


class PositionProvider:
    """Node positions over time, tuned for non-decreasing queries.

    Keeps a per-node cursor into the waypoint legs so that advancing time
    costs O(1) amortized; arbitrary (earlier) times fall back to a scan
    from the start.
    """

    def __init__(self, trace: MobilityTrace):
        self.trace = trace
        self.n = len(trace.node_ids)
        self.static = trace.static
        pos0 = np.asarray(
            [trace.initial_positions[n] for n in trace.node_ids], dtype=float
        )
        if self.static:
            self._arr = pos0
            return
        dep, arr, rel, x0, y0, x1, y1 = [], [], [], [], [], [], []
        self._offsets = []
        self._counts = []
        for node in trace.node_ids:
            legs = trace.legs[node]
            self._offsets.append(len(dep))
            self._counts.append(len(legs))
            for leg in legs:
                dep.append(leg.depart_time)
                a = leg.arrival_time
                arr.append(a)
                rel.append(a + leg.pause_after)
                x0.append(leg.start.x)
                y0.append(leg.start.y)
                x1.append(leg.end.x)
                y1.append(leg.end.y)
        self._dep = dep
        self._arr = arr
        self._rel = rel
        self._x0, self._y0, self._x1, self._y1 = x0, y0, x1, y1
        self._dep_np = np.asarray(dep)
        self._arr_np = np.asarray(arr)
        self._rel_np = np.asarray(rel)
        self._x0_np = np.asarray(x0)
        self._y0_np = np.asarray(y0)
        self._x1_np = np.asarray(x1)
        self._y1_np = np.asarray(y1)
        self._off_np = np.asarray(self._offsets)
        self._cnt_np = np.asarray(self._counts)
        self._cursor = np.zeros(self.n, dtype=np.int64)
        self._cache_t = None
        self._cache_arr = None

    def array_at(self, t: float) -> np.ndarray:
        """Positions of all nodes as an (N, 2) array."""
        if self.static:
            return self._arr
        if self._cache_t == t:
            return self._cache_arr
        idx = self._off_np + self._cursor
        behind = self._cursor > 0
        if behind.any():
            # queries can go backwards (tests); restart those cursors
            back = behind & (t < self._dep_np[idx])
            if back.any():
                self._cursor[back] = 0
                idx = self._off_np + self._cursor
        can_advance = (self._cursor < self._cnt_np - 1) & (t >= self._rel_np[idx])
        while can_advance.any():
            self._cursor[can_advance] += 1
            idx = self._off_np + self._cursor
            can_advance = (self._cursor < self._cnt_np - 1) & (t >= self._rel_np[idx])
        travel = self._arr_np[idx] - self._dep_np[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.clip((t - self._dep_np[idx]) / travel, 0.0, 1.0)
        frac[~np.isfinite(frac)] = 1.0
        out = np.empty((self.n, 2))
        out[:, 0] = self._x0_np[idx] + (self._x1_np[idx] - self._x0_np[idx]) * frac
        out[:, 1] = self._y0_np[idx] + (self._y1_np[idx] - self._y0_np[idx]) * frac
        self._cache_t = t
        self._cache_arr = out
        return out

    def node_at(self, node: int, t: float) -> tuple[float, float]:
        if self.static:
            return (self._arr[node, 0], self._arr[node, 1])
        c = int(self._cursor[node])
        off = self._offsets[node]
        if c > 0 and t < self._dep[off + c]:
            c = 0
        last = self._counts[node] - 1
        while c < last and t >= self._rel[off + c]:
            c += 1
        self._cursor[node] = c
        i = off + c
        dep = self._dep[i]
        arr = self._arr[i]
        if t <= dep or arr <= dep:
            return (self._x0[i], self._y0[i])
        if t >= arr:
            return (self._x1[i], self._y1[i])
        frac = (t - dep) / (arr - dep)
        return (
            self._x0[i] + (self._x1[i] - self._x0[i]) * frac,
            self._y0[i] + (self._y1[i] - self._y0[i]) * frac,
        )


class _LazyAdjacency:
    """Mapping view over a Topology's neighbor arrays."""

    __slots__ = ("_topo",)

    def __init__(self, topo):
        self._topo = topo

    def __getitem__(self, node):
        return frozenset(self._topo.neighbors(node))

    def __iter__(self):
        return iter(self._topo.node_ids)

    def __len__(self):
        return len(self._topo.node_ids)


class Topology:
    """Unit-disk connectivity snapshot over a position array.

    Duck-types the graph protocol used by hop distance and replication
    helpers (node_ids, adjacency). Distance rows and neighbor lists are
    computed per node on first use, so a query attempt only pays for the
    part of the network it actually touches.
    """

    def __init__(self, pos: np.ndarray, radio_range: float):
        self.pos = pos
        self.radio_range = radio_range
        self.node_ids = range(len(pos))
        self._x = np.ascontiguousarray(pos[:, 0])
        self._y = np.ascontiguousarray(pos[:, 1])
        self._r2 = radio_range * radio_range
        self._rows: dict[int, np.ndarray] = {}
        self._nbrs: dict[int, list[int]] = {}
        self.adjacency = _LazyAdjacency(self)

    def d2_row(self, node: int) -> np.ndarray:
        row = self._rows.get(node)
        if row is None:
            dx = self._x - self._x[node]
            dy = self._y - self._y[node]
            row = dx * dx + dy * dy
            self._rows[node] = row
        return row

    def neighbors(self, node: int) -> list[int]:
        nbrs = self._nbrs.get(node)
        if nbrs is None:
            row = np.flatnonzero(self.d2_row(node) <= self._r2)
            nbrs = [int(v) for v in row if v != node]
            self._nbrs[node] = nbrs
        return nbrs

    @property
    def positions(self) -> dict[int, Position]:
        return {i: Position(self.pos[i, 0], self.pos[i, 1]) for i in self.node_ids}


class TopologyProvider:
    def __init__(self, provider: PositionProvider, radio_range: float):
        self._provider = provider
        self._range = radio_range
        self._static_topo = None
        self._cache_t = None
        self._cache = None

    def at(self, t: float) -> Topology:
        if self._provider.static:
            if self._static_topo is None:
                self._static_topo = Topology(self._provider.array_at(0.0), self._range)
            return self._static_topo
        if self._cache_t != t:
            self._cache = Topology(self._provider.array_at(t).copy(), self._range)
            self._cache_t = t
        return self._cache


# ---------------------------------------------------------------------------
# Demand generation
# ---------------------------------------------------------------------------


def phase_windows(phases: list[DemandPhase], duration: float) -> list[tuple[DemandPhase, float, float]]:
    out = []
    for i, ph in enumerate(phases):
        end = phases[i + 1].start if i + 1 < len(phases) else duration
        out.append((ph, ph.start, min(end, duration)))
    return out


def generate_demand(phases, node_ids, duration: float, seed, position_fn=None):
    """Per-node Poisson query-issue times under the phased demand profile.

    Nodes outside a phase's active region at the event time issue nothing
    (requires ``position_fn``). Whether the node holds a replica at that
    moment is runtime state and is filtered by the engine instead.
    Returns a time-sorted list of (t, node).
    """
    rng = random.Random(seed)
    events = []
    for node in sorted(node_ids):
        for ph, start, end in phase_windows(list(phases), duration):
            if ph.rate <= 0 or start >= end:
                continue
            if ph.region is not None and position_fn is None:
                raise ValueError("active_region demand requires a position_fn")
            t = start + rng.expovariate(ph.rate)
            while t < end:
                if ph.region is None or _in_box(position_fn(node, t), ph.region):
                    events.append((t, node))
                t += rng.expovariate(ph.rate)
    events.sort()
    return events


def _in_box(p, box) -> bool:
    x0, y0, x1, y1 = box
    return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


# ---------------------------------------------------------------------------
# The simulation proper
# ---------------------------------------------------------------------------


@dataclass
class _Txn:
    qid: int
    origin: int
    mode: str
    t_issue: float
    attempts: int = 0
    entry_idx: int = 0
    solved_at: float | None = None
    first_hops: int | None = None
    delivered: set = field(default_factory=set)
    canceled: bool = False
    gave_up: bool = False


class _Simulation:
    def __init__(self, config: SimConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = seed
        net = config.network
        self.n = net.nodes
        self.duration = net.duration
        self.warmup = net.warmup
        self.area = config.area

        layout_rng = random.Random(derive_seed(seed, "layout"))
        if config.mobility.model == "static":
            positions = {
                i: Position(
                    layout_rng.uniform(0.0, self.area.width),
                    layout_rng.uniform(0.0, self.area.height),
                )
                for i in range(self.n)
            }
            trace = static_trace(self.area, positions, self.duration)
        else:
            trace = generate_trace(
                self.area,
                self.n,
                config.mobility.speed,
                config.mobility.pause,
                self.duration,
                derive_seed(seed, "mobility"),
            )
        self.positions = PositionProvider(trace)
        self.topo = TopologyProvider(self.positions, net.radio_range)

        acc = config.access
        self.link = access.LinkLayer(
            per_hop_delay=acc.per_hop_delay,
            per_hop_loss=acc.per_hop_loss,
            rng=random.Random(derive_seed(seed, "link")),
        )
        self.rwd_rng = random.Random(derive_seed(seed, "rwd"))
        self.selective_rng = random.Random(derive_seed(seed, "selective"))
        self.stats_rng = np.random.default_rng(derive_seed(seed, "stats"))

        rep = config.replication
        self.params = replication.ReplicationParams(
            storage_time=rep.storage_time,
            ref_workload=rep.ref_workload,
            tolerance=rep.tolerance,
        )
        self.replicas = replication.ReplicaSet()

        self.heap: list[Event] = []
        self._seq = 0
        self.txns: dict[int, _Txn] = {}
        self._next_qid = 0
        self.active_by_node: dict[int, set[int]] = {}

        self.snapshots: list[stats.SnapshotMetrics] = []
        self.decisions: list[DecisionRecord] = []
        self.workload: list[WorkloadRecord] = []

        self._sector_width = TWO_PI / acc.sectors
        self._scan_entries = acc.sectors * acc.scan_rounds
        self._bin_edges = stats.uniform_edges(self.area.diagonal(), config.output.bins)
        self._region = next((ph.region for ph in config.phases if ph.region), None)

    # -- scheduling helpers --------------------------------------------------

    def push(self, t: float, kind: str, payload) -> None:
        self._seq += 1
        heappush(self.heap, Event(t, EVENT_PRIORITY[kind], self._seq, kind, payload))

    def _initial_events(self) -> None:
        events: list[Event] = []

        def add(t, kind, payload):
            self._seq += 1
            events.append(Event(t, EVENT_PRIORITY[kind], self._seq, kind, payload))

        for i, ph in enumerate(self.config.phases):
            if ph.start > 0:
                add(ph.start, DEMAND_SWITCH, i)
        tau = self.params.storage_time
        t = tau
        while t <= self.duration + 1e-9:
            add(round(t, 9), SNAPSHOT, None)
            t += tau

        layout_rng = random.Random(derive_seed(self.seed, "placement"))
        initial = sorted(layout_rng.sample(range(self.n), self.config.replication.initial_replicas))
        for node in initial:
            self.replicas.add(replication.ReplicaState(node=node, period_start=0.0, served=0))
            add(tau, PERIOD_EXPIRY, (node, 0.0))

        demand = generate_demand(
            self.config.phases,
            range(self.n),
            self.duration,
            derive_seed(self.seed, "demand"),
            position_fn=self.positions.node_at,
        )
        for t, node in demand:
            add(t, QUERY_ISSUE, node)

        self.heap = events
        heapify(self.heap)

    # -- replica bookkeeping -------------------------------------------------

    def _grant_copy(self, node: int, t: float) -> None:
        self.replicas.add(replication.ReplicaState(node=node, period_start=t, served=0))
        self.push(t + self.params.storage_time, PERIOD_EXPIRY, (node, t))
        for qid in self.active_by_node.get(node, ()):
            txn = self.txns[qid]
            if txn.solved_at is None and not txn.gave_up:
                txn.canceled = True

    def _on_period_expiry(self, t: float, payload) -> None:
        node, period_start = payload
        state = self.replicas.states.get(node)
        if state is None or state.period_start != period_start:
            return  # stale timer for a copy this node no longer holds
        if not self.config.replication.adapt:
            decision = replication.HANDOVER
            topo = self.topo.at(t)
            target = replication.rwd_target(
                topo, node, self.rwd_rng, exclude=self.replicas.nodes()
            )
            holders = (target,) if target is not None else (node,)
        else:
            topo = self.topo.at(t)
            outcome = replication.on_period_expiry(
                state, topo, self.params, self.rwd_rng, occupied=self.replicas.nodes()
            )
            decision = outcome.decision
            holders = outcome.next_holders
        self.replicas.remove(node)
        for holder in holders:
            self._grant_copy(holder, t)
        self.workload.append(WorkloadRecord(t, node, state.served))
        self.decisions.append(DecisionRecord(t, node, state.served, decision, len(self.replicas)))

    def _give_up(self, txn: _Txn, t: float) -> None:
        txn.gave_up = True
        if self.config.replication.adapt and not self.replicas.holds(txn.origin):
            replicas_len = len(self.replicas)
            self._grant_copy(txn.origin, t)
            self.decisions.append(
                DecisionRecord(t, txn.origin, 0, "miss", replicas_len + 1)
            )

    # -- query lifecycle -----------------------------------------------------

    def _on_query_issue(self, t: float, node: int) -> None:
        if self.replicas.holds(node):
            return
        self._next_qid += 1
        txn = _Txn(qid=self._next_qid, origin=node, mode=self.config.access.mode, t_issue=t)
        self.txns[txn.qid] = txn
        self.active_by_node.setdefault(node, set()).add(txn.qid)
        if txn.mode == access.SCAN:
            self._start_scan_entry(txn, t)
        else:
            self._start_attempt(txn, t)

    def _start_attempt(self, txn: _Txn, t: float) -> None:
        txn.attempts += 1
        acc = self.config.access
        topo = self.topo.at(t)
        reps = self.replicas.nodes()
        if txn.mode == access.PERFECT:
            if not reps:
                self._give_up(txn, t)
                return
            target = self._nearest_replica(topo, reps, txn.origin)
            hits, parents = access.propagate(
                topo.neighbors, txn.origin, reps, acc.max_hops, self.link.transmit,
                stop_at=target,
            )
            serves = [(r, lvl) for r, lvl in hits if r == target]
        else:
            hits, parents = access.propagate(
                topo.neighbors, txn.origin, reps, acc.max_hops, self.link.transmit
            )
            hits.sort(key=lambda h: (h[1], h[0]))
            if txn.mode == access.FLOOD_SELECTIVE:
                serves = [
                    (r, lvl)
                    for r, lvl in hits
                    if self.selective_rng.random() < access.selective_reply_probability(lvl)
                ]
            else:
                serves = hits
        self._schedule_replies(txn, t, serves, parents)
        self.push(t + acc.query_timeout, ATTEMPT_TIMEOUT, (txn.qid, txn.attempts))

    def _nearest_replica(self, topo: Topology, reps, consumer: int) -> int:
        row = topo.d2_row(consumer)
        return min(sorted(reps), key=lambda r: (row[r], r))

    def _start_scan_entry(self, txn: _Txn, t: float) -> None:
        acc = self.config.access
        topo = self.topo.at(t)
        reps = self.replicas.nodes()
        sector_idx = txn.entry_idx % acc.sectors
        start_angle = sector_idx * self._sector_width
        ox, oy = topo.pos[txn.origin, 0], topo.pos[txn.origin, 1]
        if acc.sectors == 1:
            allowed = None
        else:
            ang = np.arctan2(topo.pos[:, 1] - oy, topo.pos[:, 0] - ox) % TWO_PI
            rel = (ang - start_angle) % TWO_PI
            rel[rel >= TWO_PI] = 0.0  # modulo can round up to the full turn
            mask = rel < self._sector_width
            mask[txn.origin] = True
            allowed = mask.__getitem__
        if reps:
            hits, parents = access.propagate(
                topo.neighbors, txn.origin, reps, acc.max_hops, self.link.transmit,
                allowed=allowed,
            )
            hits.sort(key=lambda h: (h[1], h[0]))
            self._schedule_replies(txn, t, hits, parents)
        self.push(t + acc.sector_timeout, SECTOR_TIMEOUT, (txn.qid, txn.entry_idx))

    def _schedule_replies(self, txn: _Txn, t: float, serves, parents) -> None:
        delay = self.link.per_hop_delay
        for replica, hops in serves:
            path = access.path_from_parents(parents, txn.origin, replica)
            reverse = (replica,) + tuple(reversed(path[:-1])) + (txn.origin,)
            self.push(t + (hops + 1) * delay, REPLY_HOP, (txn.qid, replica, reverse, 0, hops))

    def _on_reply_hop(self, t: float, payload) -> None:
        qid, replica, path, idx, hops = payload
        txn = self.txns[qid]
        sender = path[idx]
        receiver = path[idx + 1]
        if idx == 0:
            # the replica commits to serving when it sends, delivered or not
            state = self.replicas.states.get(replica)
            if state is not None:
                state.served += 1
        pu = self.positions.node_at(sender, t)
        pv = self.positions.node_at(receiver, t)
        dx = pu[0] - pv[0]
        dy = pu[1] - pv[1]
        r = self.config.network.radio_range
        if dx * dx + dy * dy > r * r:
            return  # relay moved out of range, reply lost
        if not self.link.transmit():
            return
        if idx + 2 == len(path):
            if txn.canceled or txn.gave_up:
                return
            txn.delivered.add(replica)
            if txn.solved_at is None:
                txn.solved_at = t
                txn.first_hops = hops
            return
        self.push(t + self.link.per_hop_delay, REPLY_HOP, (qid, replica, path, idx + 1, hops))

    def _on_attempt_timeout(self, t: float, payload) -> None:
        qid, attempt_no = payload
        txn = self.txns[qid]
        if txn.solved_at is not None or txn.canceled or txn.gave_up:
            return
        if attempt_no != txn.attempts:
            return
        action = access.retry_controller(
            txn.mode, [False] * txn.attempts, max_attempts=self.config.access.retries
        )
        if action == access.RETRY:
            self._start_attempt(txn, t)
        else:
            self._give_up(txn, t)

    def _on_sector_timeout(self, t: float, payload) -> None:
        qid, entry_idx = payload
        txn = self.txns[qid]
        if txn.solved_at is not None or txn.canceled or txn.gave_up:
            return
        if entry_idx != txn.entry_idx:
            return
        txn.entry_idx += 1
        if txn.entry_idx >= self._scan_entries:
            self._give_up(txn, t)
        else:
            self._start_scan_entry(txn, t)

    # -- measurement ---------------------------------------------------------

    def _on_snapshot(self, t: float) -> None:
        reps = tuple(sorted(self.replicas.nodes()))
        snap = stats.SnapshotMetrics(
            t=t,
            replica_count=len(reps),
            replica_nodes=reps,
            post_warmup=t > self.warmup,
        )
        out = self.config.output
        wants_chi2 = out.chi2_nodal or out.chi2_spatial
        if snap.post_warmup and (wants_chi2 or out.hop_cdf or self._region):
            topo = self.topo.at(t)
            if self._region:
                inside = {
                    i for i in range(self.n)
                    if _in_box((topo.pos[i, 0], topo.pos[i, 1]), self._region)
                }
                snap.node_frac_region = len(inside) / self.n
                if reps:
                    snap.replica_frac_region = sum(1 for r in reps if r in inside) / len(reps)
            if wants_chi2 and len(reps) >= 2:
                edges = np.asarray(self._bin_edges)
                observed = stats.Histogram(
                    self._bin_edges,
                    tuple(int(c) for c in stats._pair_histogram(topo.pos[list(reps)], edges)),
                )
                positions = {i: (topo.pos[i, 0], topo.pos[i, 1]) for i in range(self.n)}
                if out.chi2_nodal:
                    ref = stats.nodal_uniform_reference(
                        positions, len(reps), out.chi2_draws, self.stats_rng, self._bin_edges
                    )
                    snap.chi2_nodal = stats.chi_square(observed, ref)
                if out.chi2_spatial:
                    ref = stats.spatial_uniform_reference(
                        self.area, len(reps), out.chi2_draws, self.stats_rng, self._bin_edges
                    )
                    snap.chi2_spatial = stats.chi_square(observed, ref)
                if out.chi2_nodal and self._region and 2 <= len(reps) <= len(inside):
                    region_pos = {i: positions[i] for i in sorted(inside)}
                    ref = stats.nodal_uniform_reference(
                        region_pos, len(reps), out.chi2_draws, self.stats_rng, self._bin_edges
                    )
                    snap.chi2_nodal_region = stats.chi_square(observed, ref)
            if out.hop_cdf and reps:
                snap.hop_cdf = stats.hop_cdf(topo, reps)
        self.snapshots.append(snap)

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        self._initial_events()
        heap = self.heap
        duration = self.duration
        handlers = {
            QUERY_ISSUE: self._on_query_issue,
            REPLY_HOP: self._on_reply_hop,
            ATTEMPT_TIMEOUT: self._on_attempt_timeout,
            SECTOR_TIMEOUT: self._on_sector_timeout,
            PERIOD_EXPIRY: self._on_period_expiry,
        }
        while heap:
            ev = heappop(heap)
            if ev.time > duration:
                break
            kind = ev.kind
            if kind == SNAPSHOT:
                self._on_snapshot(ev.time)
            elif kind == DEMAND_SWITCH:
                continue
            else:
                handlers[kind](ev.time, ev.payload)
        return self._result()

    def _result(self) -> RunResult:
        records = []
        for txn in self.txns.values():
            if txn.canceled:
                outcome, latency = "canceled", None
            elif txn.solved_at is not None:
                outcome, latency = "solved", txn.solved_at - txn.t_issue
            elif txn.gave_up:
                outcome, latency = "unsolved", None
            else:
                outcome, latency = "pending", None
            records.append(
                QueryRecord(
                    t_issue=txn.t_issue,
                    origin=txn.origin,
                    mode=txn.mode,
                    outcome=outcome,
                    latency=latency,
                    replies=len(txn.delivered),
                    hops=txn.first_hops,
                )
            )
        records.sort(key=lambda r: (r.t_issue, r.origin))
        metrics = stats.access_metrics(
            ((r.t_issue, r.outcome, r.latency, r.replies) for r in records), self.warmup
        )
        return RunResult(
            seed=self.seed,
            snapshots=self.snapshots,
            queries=records,
            workload=[w for w in self.workload],
            decisions=self.decisions,
            access=metrics,
            convergence=self._convergence(),
        )

    def _convergence(self) -> list[PhaseConvergence]:
        return compute_convergence(
            self.config,
            [(s.t, s.replica_count, s.post_warmup) for s in self.snapshots],
        )


def compute_convergence(config: SimConfig, snapshot_rows) -> list[PhaseConvergence]:
    """Per-phase settling time of the replica count toward its target.

    ``snapshot_rows`` yields (t, replica_count, post_warmup). The target in
    a region-restricted phase scales the node count by the region's share
    of the area, which is approximate under mobility.
    """
    area = config.area
    rep = config.replication
    rows = list(snapshot_rows)
    out = []
    for ph, start, end in phase_windows(config.phases, config.network.duration):
        n_active = config.network.nodes
        if ph.region is not None:
            x0, y0, x1, y1 = ph.region
            n_active *= ((x1 - x0) * (y1 - y0)) / (area.width * area.height)
        try:
            target = replication.target_replica_count(
                n_active, ph.rate, rep.storage_time, rep.ref_workload
            )
        except ValueError:
            target = None
        series = [(t, count) for t, count, post in rows if post and start < t <= end]
        time = stats.convergence_time(series, target) if target else None
        out.append(PhaseConvergence(start=start, rate=ph.rate, target=target, time=time))
    return out


def run(config: SimConfig, seed: int | None = None) -> RunResult:
    """Simulate one run; fully reproducible from (config, seed)."""
    if seed is None:
        seed = config.network.seed
    return _Simulation(config, seed).run()


def _run_for_pool(args) -> RunResult:
    config, seed = args
    return run(config, seed)


def run_batch(config: SimConfig, seeds, jobs: int = 1) -> BatchResult:
    """Independent runs across seeds, optionally in parallel processes."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_for_pool, [(config, s) for s in seeds]))
    else:
        runs = [run(config, s) for s in seeds]
    return BatchResult(config=config, seeds=seeds, runs=runs)
