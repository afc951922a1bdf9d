"""Simulation configuration tree with validation and defaults.

Defaults reproduce the reference evaluation setup: 320 nodes on a
200 x 200 m square with a 20 m radio range, walking at 3 m/s with 100 s
pauses, 100 s storage periods, a 0.01 req/s per-consumer demand and a
reference workload of 10 served queries per period.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .access import MODES
from .geometry import Area


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the bad key."""


@dataclass
class NetworkConfig:
    nodes: int = 320
    area: tuple[float, float] = (200.0, 200.0)
    radio_range: float = 20.0
    duration: float = 10000.0
    warmup: float = 500.0
    seed: int = 1


@dataclass
class MobilityConfig:
    model: str = "random_waypoint"  # or "static"
    speed: float = 3.0
    pause: float = 100.0


@dataclass
class AccessConfig:
    mode: str = "perfect"
    max_hops: int = 5
    sectors: int = 5
    sector_timeout: float = 0.5
    scan_rounds: int = 5
    retries: int = 5
    query_timeout: float = 2.0
    per_hop_delay: float = 0.005
    per_hop_loss: float = 0.02


@dataclass
class ReplicationConfig:
    storage_time: float = 100.0
    ref_workload: float = 10.0
    tolerance: float = 2.0
    adapt: bool = True
    initial_replicas: int = 30


@dataclass
class DemandPhase:
    start: float = 0.0
    rate: float = 0.01
    region: tuple[float, float, float, float] | None = None


@dataclass
class OutputConfig:
    chi2_nodal: bool = False
    chi2_spatial: bool = False
    chi2_draws: int = 200
    bins: int = 10
    hop_cdf: bool = False
    query_log: bool = True


@dataclass
class SimConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    access: AccessConfig = field(default_factory=AccessConfig)
    replication: ReplicationConfig = field(default_factory=ReplicationConfig)
    phases: list[DemandPhase] = field(default_factory=lambda: [DemandPhase()])
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def area(self) -> Area:
        return Area(*self.network.area)

    def validate(self) -> None:
        net = self.network
        if net.nodes < 1:
            raise ConfigError("network.nodes must be >= 1")
        if net.area[0] <= 0 or net.area[1] <= 0:
            raise ConfigError("network.area sides must be positive")
        if net.radio_range <= 0:
            raise ConfigError("network.radio_range must be positive")
        if net.duration <= 0:
            raise ConfigError("network.duration must be positive")
        if not 0 <= net.warmup <= net.duration:
            raise ConfigError("network.warmup must lie within [0, duration]")

        mob = self.mobility
        if mob.model not in ("random_waypoint", "static"):
            raise ConfigError(f"mobility.model {mob.model!r} is not 'random_waypoint' or 'static'")
        if mob.model == "random_waypoint":
            if mob.speed <= 0:
                raise ConfigError("mobility.speed must be positive")
            if mob.pause < 0:
                raise ConfigError("mobility.pause must be non-negative")

        acc = self.access
        if acc.mode not in MODES:
            raise ConfigError(f"access.mode {acc.mode!r} is not one of {'/'.join(MODES)}")
        if acc.max_hops < 1:
            raise ConfigError("access.max_hops must be >= 1")
        if acc.sectors < 1:
            raise ConfigError("access.sectors must be >= 1")
        if acc.sector_timeout <= 0:
            raise ConfigError("access.sector_timeout must be positive")
        if acc.scan_rounds < 1:
            raise ConfigError("access.scan_rounds must be >= 1")
        if acc.retries < 1:
            raise ConfigError("access.retries must be >= 1")
        if acc.query_timeout <= 0:
            raise ConfigError("access.query_timeout must be positive")
        if acc.per_hop_delay <= 0:
            raise ConfigError("access.per_hop_delay must be positive")
        if not 0 <= acc.per_hop_loss < 1:
            raise ConfigError("access.per_hop_loss must be in [0, 1)")

        rep = self.replication
        if rep.storage_time <= 0:
            raise ConfigError("replication.storage_time must be positive")
        if rep.ref_workload < 0:
            raise ConfigError("replication.ref_workload must be non-negative")
        if rep.tolerance < 0:
            raise ConfigError("replication.tolerance must be non-negative")
        if not 0 <= rep.initial_replicas <= net.nodes:
            raise ConfigError("replication.initial_replicas must be in [0, nodes]")

        if not self.phases:
            raise ConfigError("demand must define at least one phase")
        last = None
        for i, ph in enumerate(self.phases, start=1):
            key = f"demand.phase.{i}"
            if ph.rate < 0:
                raise ConfigError(f"{key}.rate must be non-negative")
            if ph.start < 0:
                raise ConfigError(f"{key}.start must be non-negative")
            if last is not None and ph.start <= last:
                raise ConfigError(f"{key}.start must increase across phases")
            if ph.region is not None:
                x0, y0, x1, y1 = ph.region
                if not (0 <= x0 < x1 <= net.area[0] and 0 <= y0 < y1 <= net.area[1]):
                    raise ConfigError(f"{key}.region must be a box inside the area")
            last = ph.start

        out = self.output
        if out.chi2_draws < 1:
            raise ConfigError("output.chi2_draws must be >= 1")
        if out.bins < 1:
            raise ConfigError("output.bins must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases"] = [asdict(p) for p in self.phases]
        return d


def config_from_dict(data: dict) -> SimConfig:
    """Rebuild a SimConfig from its to_dict form (manifest round-trip)."""
    phases = [DemandPhase(**{**p, "region": tuple(p["region"]) if p.get("region") else None})
              for p in data.get("phases", [])]
    net = dict(data.get("network", {}))
    if "area" in net:
        net["area"] = tuple(net["area"])
    cfg = SimConfig(
        network=NetworkConfig(**net),
        mobility=MobilityConfig(**data.get("mobility", {})),
        access=AccessConfig(**data.get("access", {})),
        replication=ReplicationConfig(**data.get("replication", {})),
        phases=phases or [DemandPhase()],
        output=OutputConfig(**data.get("output", {})),
    )
    cfg.validate()
    return cfg
