"""Run artifact files: CSV logs, convergence summary, manifest, figure data.

All writers are deterministic: rows come out sorted by (seed, time, node),
floats are rendered with repr so re-running a scenario with the same seed
produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from . import stats
from .config import SimConfig
from .engine import BatchResult, RunResult, compute_convergence


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _cdf_value(cdf: dict | None, h: int):
    if not cdf:
        return None
    keys = [k for k in cdf if k <= h]
    if not keys:
        return 0.0
    return cdf[max(keys)]


def snapshot_columns(config: SimConfig) -> list[str]:
    cols = ["t", "replica_count"]
    if config.output.chi2_nodal:
        cols.append("chi2_nodal")
    if config.output.chi2_spatial:
        cols.append("chi2_spatial")
    if any(ph.region for ph in config.phases) and config.output.chi2_nodal:
        cols += ["chi2_nodal_region", "replica_frac_region", "node_frac_region"]
    if config.output.hop_cdf:
        cols += [f"cdf_hop{h}" for h in range(1, 6)]
    return cols


def _snapshot_row(snap: stats.SnapshotMetrics, cols) -> list:
    row = []
    for col in cols:
        if col == "t":
            row.append(snap.t)
        elif col == "replica_count":
            row.append(snap.replica_count)
        elif col.startswith("cdf_hop"):
            row.append(_cdf_value(snap.hop_cdf, int(col[len("cdf_hop"):])))
        else:
            row.append(getattr(snap, col))
    return row


ACCESS_HEADER = [
    "seed", "issued", "solved", "solving_ratio",
    "red_min", "red_q25", "red_q50", "red_q75", "red_max", "red_mean",
    "lat_min", "lat_q25", "lat_q50", "lat_q75", "lat_max", "lat_mean",
]


def _summary_cells(summary: stats.QuantileSummary | None) -> list:
    if summary is None:
        return [None] * 6
    return [summary.minimum, summary.q25, summary.median, summary.q75, summary.maximum, summary.mean]


def _access_row(label, metrics: stats.AccessMetrics | None) -> list:
    if metrics is None:
        return [label] + [None] * (len(ACCESS_HEADER) - 1)
    return (
        [label, metrics.issued, metrics.solved, metrics.solving_ratio]
        + _summary_cells(metrics.redundancy)
        + _summary_cells(metrics.latency)
    )


def write_outputs(out_dir, batch: BatchResult, manifest: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = batch.config
    warmup = config.network.warmup
    cols = snapshot_columns(config)

    pooled_records = []
    for result in batch.runs:
        run_dir = out_dir / "runs" / str(result.seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(
            run_dir / "snapshots.csv", cols,
            (_snapshot_row(s, cols) for s in result.snapshots),
        )
        if config.output.query_log:
            _write_csv(
                run_dir / "queries.csv",
                ["t_issue", "origin", "mode", "outcome", "latency", "replies", "hops"],
                result.queries,
            )
        _write_csv(
            run_dir / "workload.csv", ["t", "node", "served"],
            (w for w in result.workload if w.t > warmup),
        )
        _write_csv(
            run_dir / "decisions.csv",
            ["t", "node", "served", "decision", "replicas_after"],
            result.decisions,
        )
        pooled_records.extend(
            (q.t_issue, q.outcome, q.latency, q.replies) for q in result.queries
        )

    _write_csv(
        out_dir / "snapshots.csv", ["seed"] + cols,
        ([r.seed] + _snapshot_row(s, cols) for r in batch.runs for s in r.snapshots),
    )
    access_rows = [_access_row(r.seed, r.access) for r in batch.runs]
    access_rows.append(_access_row("pooled", stats.access_metrics(pooled_records, warmup)))
    _write_csv(out_dir / "access.csv", ACCESS_HEADER, access_rows)
    _write_csv(
        out_dir / "workload.csv", ["seed", "t", "node", "served"],
        ([r.seed, w.t, w.node, w.served] for r in batch.runs for w in r.workload if w.t > warmup),
    )
    _write_csv(
        out_dir / "decisions.csv",
        ["seed", "t", "node", "served", "decision", "replicas_after"],
        ([r.seed] + list(d) for r in batch.runs for d in r.decisions),
    )

    conv = {"phases": []}
    for i, phase in enumerate(batch.runs[0].convergence):
        times = {str(r.seed): r.convergence[i].time for r in batch.runs}
        settled = [t for t in times.values() if t is not None]
        conv["phases"].append(
            {
                "start": phase.start,
                "rate": phase.rate,
                "target": phase.target,
                "times": times,
                "mean": sum(settled) / len(settled) if settled else None,
                "unconverged": len(times) - len(settled),
            }
        )
    _write_json(out_dir / "convergence.json", conv)
    _write_json(out_dir / "manifest.json", manifest)


def _write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Post-processing: recompute derived metrics from the raw logs and emit
# gnuplot-ready figure data.
# ---------------------------------------------------------------------------


class StatsMismatch(RuntimeError):
    """Stored derived metrics disagree with their recomputation."""


def _read_csv(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _opt_float(cell: str):
    return float(cell) if cell not in ("", None) else None


def _check_close(stored, recomputed, what: str, tol: float = 1e-9) -> None:
    if stored is None and recomputed is None:
        return
    if stored is None or recomputed is None:
        raise StatsMismatch(f"{what}: stored {stored!r} vs recomputed {recomputed!r}")
    if not math.isclose(stored, recomputed, rel_tol=0.0, abs_tol=tol):
        raise StatsMismatch(f"{what}: stored {stored!r} vs recomputed {recomputed!r}")


def verify_and_emit(run_dir) -> list[str]:
    """Cross-check access.csv and convergence.json against the raw logs,
    then write figure data under figdata/. Returns the files written."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    from .config import config_from_dict

    config = config_from_dict(manifest["config"])
    warmup = config.network.warmup
    seeds = manifest["seeds"]

    access_rows = {row["seed"]: row for row in _read_csv(run_dir / "access.csv")}
    pooled_records = []
    for seed in seeds:
        qpath = run_dir / "runs" / str(seed) / "queries.csv"
        if not qpath.exists():
            continue
        records = [
            (float(q["t_issue"]), q["outcome"], _opt_float(q["latency"]), int(q["replies"]))
            for q in _read_csv(qpath)
        ]
        pooled_records.extend(records)
        recomputed = stats.access_metrics(records, warmup)
        stored = access_rows.get(str(seed))
        if stored is None:
            raise StatsMismatch(f"access.csv has no row for seed {seed}")
        _verify_access_row(stored, recomputed, f"seed {seed}")
    if pooled_records and "pooled" in access_rows:
        _verify_access_row(
            access_rows["pooled"], stats.access_metrics(pooled_records, warmup), "pooled"
        )

    snap_rows = _read_csv(run_dir / "snapshots.csv")
    conv = json.loads((run_dir / "convergence.json").read_text())
    for seed in seeds:
        rows = [
            (float(r["t"]), float(r["replica_count"]), float(r["t"]) > warmup)
            for r in snap_rows
            if r["seed"] == str(seed)
        ]
        for i, phase in enumerate(compute_convergence(config, rows)):
            stored = conv["phases"][i]["times"][str(seed)]
            _check_close(stored, phase.time, f"convergence seed {seed} phase {i}")

    return _emit_figdata(run_dir, config, seeds, snap_rows)


def _verify_access_row(stored: dict, recomputed: stats.AccessMetrics | None, what: str) -> None:
    if recomputed is None:
        if stored["solving_ratio"] not in ("", None):
            raise StatsMismatch(f"{what}: stored metrics but nothing recomputed")
        return
    _check_close(_opt_float(stored["solving_ratio"]), recomputed.solving_ratio, f"{what} solving_ratio")
    for prefix, summary in (("red", recomputed.redundancy), ("lat", recomputed.latency)):
        cells = dict(
            zip(
                ("min", "q25", "q50", "q75", "max", "mean"),
                _summary_cells(summary),
            )
        )
        for suffix, value in cells.items():
            _check_close(_opt_float(stored[f"{prefix}_{suffix}"]), value, f"{what} {prefix}_{suffix}")


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _emit_figdata(run_dir: Path, config: SimConfig, seeds, snap_rows) -> list[str]:
    fig_dir = run_dir / "figdata"
    fig_dir.mkdir(exist_ok=True)
    written = []

    def emit(name: str, header: str, lines) -> None:
        path = fig_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {header}\n")
            for line in lines:
                fh.write(" ".join(_fmt(v) for v in line) + "\n")
        written.append(str(path))

    by_t: dict[float, list[dict]] = {}
    for row in snap_rows:
        by_t.setdefault(float(row["t"]), []).append(row)

    emit(
        "replicas.dat", "t mean_replicas min max",
        (
            (
                t,
                _mean([float(r["replica_count"]) for r in rows]),
                min(float(r["replica_count"]) for r in rows),
                max(float(r["replica_count"]) for r in rows),
            )
            for t, rows in sorted(by_t.items())
        ),
    )

    chi_cols = [c for c in ("chi2_nodal", "chi2_spatial", "chi2_nodal_region") if c in snap_rows[0]]
    if chi_cols:
        emit(
            "chi2.dat", "t " + " ".join(f"mean_{c}" for c in chi_cols),
            (
                [t] + [_mean([_opt_float(r[c]) for r in rows]) for c in chi_cols]
                for t, rows in sorted(by_t.items())
            ),
        )

    cdf_cols = [c for c in snap_rows[0] if c.startswith("cdf_hop")]
    if cdf_cols:
        emit(
            "hopcdf.dat", "hop mean_cdf",
            (
                (int(c[len("cdf_hop"):]), _mean([_opt_float(r[c]) for r in snap_rows]))
                for c in cdf_cols
            ),
        )

    access_rows = _read_csv(run_dir / "access.csv")
    emit(
        "access.dat", " ".join(ACCESS_HEADER),
        ([row[c] for c in ACCESS_HEADER] for row in access_rows),
    )

    work_rows = _read_csv(run_dir / "workload.csv")
    if work_rows:
        served = [float(r["served"]) for r in work_rows]
        s = stats.summarize(served)
        emit(
            "workload.dat", "label min q25 q50 q75 max mean count",
            [("pooled", s.minimum, s.q25, s.median, s.q75, s.maximum, s.mean, s.count)],
        )

    dec_rows = _read_csv(run_dir / "decisions.csv")
    if dec_rows:
        bucket = 1000.0
        lines = []
        horizon = config.network.duration
        t_edge = bucket
        while t_edge <= horizon + 1e-9:
            reps = sum(1 for r in dec_rows if r["decision"] == "replicate" and float(r["t"]) <= t_edge)
            drops = sum(1 for r in dec_rows if r["decision"] == "drop" and float(r["t"]) <= t_edge)
            lines.append((t_edge, reps / drops if drops else None, reps, drops))
            t_edge += bucket
        emit("repdrop.dat", "t cumulative_replicate_drop_ratio replicates drops", lines)

    return written
