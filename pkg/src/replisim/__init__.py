"""Distributed content replication over mobile wireless networks:
simulator, facility-location solver and measurement toolkit."""

__version__ = "0.1.0"

from .config import SimConfig
from .engine import run, run_batch
from .geometry import Area, NetworkGraph, Position, Sector, build_graph
from .replication import target_replica_count

__all__ = [
    "SimConfig",
    "run",
    "run_batch",
    "Area",
    "NetworkGraph",
    "Position",
    "Sector",
    "build_graph",
    "target_replica_count",
    "__version__",
]
