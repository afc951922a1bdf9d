"""Measurement toolkit: placement fit, access metrics, convergence.

Replica placement quality is scored with a Pearson chi-square test on the
multiset of inter-replica distances, compared against reference
histograms built by Monte-Carlo sampling (uniform over nodes, or uniform
over the area). Access performance is summarized as solving ratio plus
nearest-rank quantiles of reply redundancy and latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Area, NetworkGraph, hop_distances

CHI2_GOOD_FIT = 3.84  # conventional 95% cut-off at one degree of freedom
MIN_EXPECTED_PER_BIN = 5.0


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("need exactly len(bin_edges)-1 counts")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts)


def uniform_edges(upper: float, bins: int) -> tuple[float, ...]:
    """Equal-width bin edges over [0, upper]."""
    if upper <= 0 or bins < 1:
        raise ValueError("need upper > 0 and bins >= 1")
    return tuple(upper * i / bins for i in range(bins + 1))


def make_histogram(samples, bin_edges) -> Histogram:
    counts, _ = np.histogram(np.asarray(list(samples), dtype=float), bins=np.asarray(bin_edges))
    return Histogram(tuple(bin_edges), tuple(int(c) for c in counts))


def chi_square(observed: Histogram, expected: Histogram) -> float:
    """Pearson statistic of ``observed`` against the ``expected`` shape.

    Expected counts are first rescaled to the observed total. Bins whose
    expected count falls below 5 are pooled with the following bin (the
    trailing remainder is pooled backwards), the standard validity rule
    for the test.
    """
    if observed.bin_edges != expected.bin_edges:
        raise ValueError("histograms must share bin edges")
    exp_total = expected.total
    if exp_total == 0:
        raise ValueError("expected histogram is all zero")
    obs_total = observed.total
    scale = obs_total / exp_total
    obs_merged: list[float] = []
    exp_merged: list[float] = []
    acc_o = 0.0
    acc_e = 0.0
    for o, e in zip(observed.counts, expected.counts):
        acc_o += o
        acc_e += e * scale
        if acc_e >= MIN_EXPECTED_PER_BIN:
            obs_merged.append(acc_o)
            exp_merged.append(acc_e)
            acc_o = 0.0
            acc_e = 0.0
    if acc_e > 0.0 or acc_o > 0.0:
        if exp_merged:
            obs_merged[-1] += acc_o
            exp_merged[-1] += acc_e
        else:
            obs_merged.append(acc_o)
            exp_merged.append(acc_e)
    stat = 0.0
    for o, e in zip(obs_merged, exp_merged):
        if e == 0.0:
            if o:
                return math.inf
            continue
        d = o - e
        stat += d * d / e
    return stat


def interdistance_samples(positions, replicas: Iterable[int]) -> list[float]:
    """All ordered-pair distances between distinct replica nodes."""
    nodes = sorted(replicas)
    if len(nodes) < 2:
        return []
    pts = np.asarray([positions[n] for n in nodes], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    mask = ~np.eye(len(nodes), dtype=bool)
    return d[mask].tolist()


def _pair_histogram(points: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Ordered-pair distance histogram for one point set."""
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    mask = ~np.eye(len(points), dtype=bool)
    counts, _ = np.histogram(d[mask], bins=edges)
    return counts


def nodal_uniform_reference(positions, n_replicas: int, n_draws: int, seed, bin_edges) -> Histogram:
    """Inter-distance histogram for replicas placed uniformly over nodes.

    Monte-Carlo: draw ``n_replicas`` distinct nodes uniformly, accumulate
    their ordered-pair distances, repeat ``n_draws`` times.
    """
    nodes = sorted(positions)
    if n_replicas > len(nodes):
        raise ValueError("cannot draw more replicas than nodes")
    edges = np.asarray(bin_edges, dtype=float)
    pts = np.asarray([positions[n] for n in nodes], dtype=float)
    rng = np.random.default_rng(seed)
    total = np.zeros(len(edges) - 1, dtype=np.int64)
    if n_replicas < 2:
        return Histogram(tuple(bin_edges), tuple(0 for _ in total))
    for _ in range(n_draws):
        pick = rng.choice(len(nodes), size=n_replicas, replace=False)
        total += _pair_histogram(pts[pick], edges)
    return Histogram(tuple(bin_edges), tuple(int(c) for c in total))


def spatial_uniform_reference(area: Area, n_replicas: int, n_draws: int, seed, bin_edges) -> Histogram:
    """Inter-distance histogram for replicas placed uniformly over the area."""
    edges = np.asarray(bin_edges, dtype=float)
    rng = np.random.default_rng(seed)
    total = np.zeros(len(edges) - 1, dtype=np.int64)
    if n_replicas < 2:
        return Histogram(tuple(bin_edges), tuple(0 for _ in total))
    for _ in range(n_draws):
        pts = rng.random((n_replicas, 2)) * np.asarray([area.width, area.height])
        total += _pair_histogram(pts, edges)
    return Histogram(tuple(bin_edges), tuple(int(c) for c in total))


def hop_cdf(g: NetworkGraph, replicas: Iterable[int]) -> dict[int, float]:
    """CDF of the hop distance from consumers to their nearest replica.

    Keys are hop counts, values the fraction of consumer (non-replica)
    nodes within that many hops. Unreachable consumers leave the CDF
    short of 1.
    """
    replicas = set(replicas)
    if not replicas:
        raise ValueError("need at least one replica")
    dist = hop_distances(g, replicas)
    consumers = [n for n in g.node_ids if n not in replicas]
    if not consumers:
        return {}
    finite = sorted(dist[n] for n in consumers if dist[n] != math.inf)
    cdf = {}
    n = len(consumers)
    for h in range(1, int(finite[-1]) + 1 if finite else 1):
        cdf[h] = sum(1 for d in finite if d <= h) / n
    return cdf


def convergence_time(
    series: Sequence[tuple[float, float]],
    target: float,
    tol: float = 0.02,
    window: int = 5,
):
    """Earliest sample time at which the windowed mean of the series stays
    within ``tol`` (relative) of ``target``.

    ``series`` is the post-warm-up (time, value) sequence sampled once per
    storage period. The mean over ``window`` consecutive samples starting
    at the returned time is within the band. Returns None when the series
    never settles.
    """
    if target <= 0:
        raise ValueError("target must be positive")
    if window < 1:
        raise ValueError("window must be >= 1")
    values = [v for _, v in series]
    times = [t for t, _ in series]
    for i in range(len(values) - window + 1):
        mean = sum(values[i : i + window]) / window
        if abs(mean - target) <= tol * target:
            return times[i]
    return None


@dataclass(frozen=True)
class QuantileSummary:
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float
    mean: float
    count: int


def quantiles(samples: Sequence[float], qs=(0.25, 0.5, 0.75)) -> dict:
    """Nearest-rank quantiles plus support bounds of a non-empty sample."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    ordered = sorted(samples)
    n = len(ordered)
    out = {}
    for q in qs:
        rank = max(1, math.ceil(q * n))
        out[q] = ordered[rank - 1]
    out["min"] = ordered[0]
    out["max"] = ordered[-1]
    return out


def summarize(samples: Sequence[float]) -> QuantileSummary:
    qs = quantiles(samples)
    return QuantileSummary(
        minimum=qs["min"],
        q25=qs[0.25],
        median=qs[0.5],
        q75=qs[0.75],
        maximum=qs["max"],
        mean=sum(samples) / len(samples),
        count=len(samples),
    )


@dataclass
class SnapshotMetrics:
    """State of the replica population sampled once per storage period."""

    t: float
    replica_count: int
    chi2_nodal: float | None = None
    chi2_spatial: float | None = None
    chi2_optimal: float | None = None
    chi2_nodal_region: float | None = None
    replica_frac_region: float | None = None
    node_frac_region: float | None = None
    hop_cdf: dict[int, float] | None = None
    replica_nodes: tuple[int, ...] = ()
    post_warmup: bool = False


@dataclass
class AccessMetrics:
    issued: int
    solved: int
    solving_ratio: float
    redundancy: QuantileSummary | None
    latency: QuantileSummary | None


def access_metrics(records, warmup: float) -> AccessMetrics | None:
    """Summarize per-query records issued after the warm-up.

    ``records`` yield (t_issue, outcome, latency, n_replies). Queries
    cancelled because their issuer received a copy mid-flight, and queries
    still pending when the run ended, are neither solved nor failed and
    are excluded. Returns None when nothing was issued (absent, rather
    than a zero ratio).
    """
    issued = 0
    solved = 0
    red = []
    lat = []
    for t_issue, outcome, latency, n_replies in records:
        if t_issue <= warmup or outcome in ("canceled", "pending"):
            continue
        issued += 1
        if outcome == "solved":
            solved += 1
            red.append(float(n_replies))
            lat.append(float(latency))
    if issued == 0:
        return None
    return AccessMetrics(
        issued=issued,
        solved=solved,
        solving_ratio=solved / issued,
        redundancy=summarize(red) if red else None,
        latency=summarize(lat) if lat else None,
    )
