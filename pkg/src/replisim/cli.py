"""Command-line entry point.

Subcommands: run a scenario, solve a facility-location instance over an
edge-list file, post-process a run directory, list bundled scenarios.
Exit codes: 0 ok, 1 runtime failure, 2 config or parse error, 3 request
beyond a capability limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import engine, facility, output, scenario
from .config import ConfigError
from .geometry import GraphFormatError, read_edge_list

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_CAPABILITY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replisim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario across seeds")
    p_run.add_argument("--scenario", required=True, help="scenario file path or bundled name")
    p_run.add_argument("--seeds", type=int, default=1, help="number of seeds to run")
    p_run.add_argument("--seed-base", type=int, default=None, help="first seed (default: scenario seed)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p_solve = sub.add_parser("solve", help="facility location over an edge-list file")
    p_solve.add_argument("graph", help="edge-list file (header, nodes, edges, demand/cost lines)")
    p_solve.add_argument("--problem", choices=["kmedian", "ufl"], default="kmedian")
    p_solve.add_argument("--k", type=int, default=None, help="facility count (kmedian)")
    p_solve.add_argument("--metric", choices=[facility.HOP, facility.EUCLIDEAN], default=facility.HOP)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--restarts", type=int, default=10)
    p_solve.add_argument("--exact", action="store_true", help="exhaustive search instead of local search")

    p_stats = sub.add_parser("stats", help="verify and post-process a run directory")
    p_stats.add_argument("run_dir")

    sub.add_parser("scenario-list", help="list bundled scenario files")
    return parser


def _resolve_scenario(name: str) -> tuple[str, str]:
    """Return (scenario_text, display_name) from a path or bundled name."""
    path = Path(name)
    if path.exists():
        return path.read_text(encoding="utf-8"), path.stem
    bare = name[:-len(".toml")] if name.endswith(".toml") else name
    if bare in scenario.bundled_scenarios():
        return scenario.bundled_scenario_text(bare), bare
    raise ConfigError(f"scenario {name!r} is neither a file nor a bundled name")


def cmd_run(args) -> int:
    try:
        text, name = _resolve_scenario(args.scenario)
        cfg = scenario.config_from_toml(text)
        scenario.apply_overrides(cfg, args.override)
        env_seed = os.environ.get("REPLISIM_SEED")
        if env_seed is not None:
            try:
                cfg.network.seed = int(env_seed)
            except ValueError:
                raise ConfigError("REPLISIM_SEED must be an integer")
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base = args.seed_base if args.seed_base is not None else cfg.network.seed
    seeds = [base + i for i in range(args.seeds)]
    try:
        batch = engine.run_batch(cfg, seeds, jobs=max(1, args.jobs))
        manifest = scenario.build_manifest(cfg, seeds, args.override, name)
        output.write_outputs(args.out, batch, manifest)
    except Exception as exc:  # noqa: BLE001 - map anything else to runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.out} (seeds {seeds[0]}..{seeds[-1]})")
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        with open(args.graph, "r", encoding="utf-8") as fh:
            gf = read_edge_list(fh)
    except FileNotFoundError:
        print(f"error: no such file {args.graph}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    demand = {v: gf.demand.get(v, 1.0) for v in gf.graph.node_ids}
    try:
        if args.problem == "kmedian":
            if args.k is None:
                print("error: --k is required for kmedian", file=sys.stderr)
                return EXIT_CONFIG
            instance = facility.FLInstance(
                graph=gf.graph, demand=demand, metric=args.metric, k=args.k
            )
        else:
            costs = {v: gf.costs.get(v, 1.0) for v in gf.graph.node_ids}
            instance = facility.FLInstance(
                graph=gf.graph, demand=demand, metric=args.metric, opening_costs=costs
            )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.exact:
            solution = facility.brute_force(instance)
        else:
            solution = facility.local_search(instance, seed=args.seed, restarts=args.restarts)
    except facility.InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    json.dump(
        {
            "problem": args.problem,
            "metric": args.metric,
            "facilities": sorted(solution.facilities),
            "assignment": {str(v): f for v, f in sorted(solution.assignment.items())},
            "cost": solution.cost,
        },
        sys.stdout,
        indent=2,
        sort_keys=True,
    )
    print()
    return EXIT_OK


def cmd_stats(args) -> int:
    run_dir = Path(args.run_dir)
    needed = [run_dir / "manifest.json", run_dir / "snapshots.csv", run_dir / "access.csv",
              run_dir / "convergence.json"]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        print(f"error: missing run artifacts: {', '.join(missing)}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        written = output.verify_and_emit(run_dir)
    except output.StatsMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    return EXIT_OK


def cmd_scenario_list(_args) -> int:
    for name, desc in scenario.bundled_scenarios().items():
        print(f"{name:24s} {desc}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": cmd_run,
        "solve": cmd_solve,
        "stats": cmd_stats,
        "scenario-list": cmd_scenario_list,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
