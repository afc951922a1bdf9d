"""Random-waypoint node movement.

Every node repeatedly picks a destination uniformly at random over the
area, travels to it in a straight line at a fixed speed, then pauses.
Traces start with a stationary leg of one pause length so that a pause
equal to the run duration yields a static node. Positions at arbitrary
times are recovered by linear interpolation along the active leg.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from typing import TextIO

from .geometry import Area, Position, euclidean_distance


@dataclass(frozen=True)
class WaypointLeg:
    start: Position
    end: Position
    depart_time: float
    speed: float
    pause_after: float

    @property
    def arrival_time(self) -> float:
        return self.depart_time + euclidean_distance(self.start, self.end) / self.speed

    @property
    def release_time(self) -> float:
        """Time at which the node leaves for the next waypoint."""
        return self.arrival_time + self.pause_after


class MobilityTrace:
    """Per-node waypoint legs covering [0, duration].

    A node with an empty leg list is static at its initial position for
    the whole run.
    """

    def __init__(self, area: Area, duration: float, initial_positions, legs, seed=None):
        self.area = area
        self.duration = float(duration)
        self.initial_positions = {n: Position(*p) for n, p in initial_positions.items()}
        self.legs = {n: tuple(node_legs) for n, node_legs in legs.items()}
        self.seed = seed
        self.node_ids = tuple(sorted(self.initial_positions))
        self._departs = {
            n: [leg.depart_time for leg in self.legs.get(n, ())] for n in self.node_ids
        }

    @property
    def static(self) -> bool:
        return all(not legs for legs in self.legs.values())

    def position_at(self, node: int, t: float) -> Position:
        if not 0.0 <= t <= self.duration:
            raise ValueError(f"t={t} outside [0, {self.duration}]")
        legs = self.legs.get(node, ())
        if not legs:
            return self.initial_positions[node]
        idx = bisect_right(self._departs[node], t) - 1
        if idx < 0:
            return legs[0].start
        return position_on_leg(legs[idx], t)

    def positions_at(self, t: float) -> dict[int, Position]:
        return {n: self.position_at(n, t) for n in self.node_ids}


def position_on_leg(leg: WaypointLeg, t: float) -> Position:
    """Interpolated position on a leg; constant during the pause."""
    if t <= leg.depart_time:
        return leg.start
    arrival = leg.arrival_time
    if t >= arrival:
        return leg.end
    frac = (t - leg.depart_time) / (arrival - leg.depart_time)
    return Position(
        leg.start.x + (leg.end.x - leg.start.x) * frac,
        leg.start.y + (leg.end.y - leg.start.y) * frac,
    )


def generate_trace(
    area: Area,
    n_nodes: int,
    speed: float,
    pause: float,
    duration: float,
    seed: int,
    initial_positions=None,
) -> MobilityTrace:
    """Generate a random-waypoint trace for ``n_nodes`` nodes.

    The node speed is fixed (not drawn per leg), which keeps the empirical
    mean speed exactly at the configured value and avoids the slowdown
    that plagues waypoint models with speeds drawn near zero.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if speed <= 0:
        raise ValueError("speed must be positive; use a static trace for fixed nodes")
    if pause < 0:
        raise ValueError("pause must be non-negative")
    rng = random.Random(seed)
    starts = {}
    legs = {}
    for node in range(n_nodes):
        if initial_positions is not None:
            here = Position(*initial_positions[node])
        else:
            here = Position(rng.uniform(0.0, area.width), rng.uniform(0.0, area.height))
        starts[node] = here
        node_legs = [WaypointLeg(here, here, 0.0, speed, pause)]
        t = node_legs[-1].release_time
        while t < duration:
            dest = Position(rng.uniform(0.0, area.width), rng.uniform(0.0, area.height))
            leg = WaypointLeg(here, dest, t, speed, pause)
            node_legs.append(leg)
            here = dest
            t = leg.release_time
        legs[node] = node_legs
    return MobilityTrace(area, duration, starts, legs, seed=seed)


def static_trace(area: Area, positions, duration: float) -> MobilityTrace:
    """Trace for a network whose nodes never move."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    return MobilityTrace(area, duration, dict(positions), {n: () for n in positions})


def dump_trace_csv(trace: MobilityTrace, out: TextIO, step: float = 1.0) -> None:
    """Write ``node,t,x,y`` rows sampled every ``step`` seconds."""
    out.write("node,t,x,y\n")
    for node in trace.node_ids:
        t = 0.0
        while t <= trace.duration:
            p = trace.position_at(node, t)
            out.write(f"{node},{t!r},{p.x!r},{p.y!r}\n")
            t += step
