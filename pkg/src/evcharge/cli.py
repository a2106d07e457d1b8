"""Command line entry point: ``evcharge {run,sweep,tours-extract,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, ContractError
from .metrics import MetricsRecord, report
from .sweep import METRICS_FILE, run_to_dir, sweep
from .tours import build_graph, extract_tours, read_trips, retention_rate, write_tours


def _override(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration_steps"] = args.duration
    if changes:
        cfg = cfg.replace(**changes)
        cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _override(load_config(args.config), args)
    out = Path(args.out or f"runs/{cfg.name}")
    metrics = run_to_dir(cfg, out)
    overloaded = sum(1 for n in metrics.overload_counts().values() if n)
    print(
        f"{cfg.name}: {metrics.duration} steps, {sum(metrics.decisions.values())} decisions, "
        f"max loading {metrics.global_max():.3f}, {overloaded} overloaded substations -> {out}"
    )
    return 0


def cmd_sweep(args) -> int:
    jobs = []
    seeds = args.seeds or [None]
    for path in args.configs:
        base = load_config(path)
        for seed in seeds:
            cfg = base if seed is None else base.replace(seed=seed)
            if args.duration is not None:
                cfg = cfg.replace(duration_steps=args.duration)
            cfg.validate()
            leaf = Path(path).stem if seed is None else f"{Path(path).stem}-s{seed}"
            jobs.append((cfg, Path(args.out) / leaf))
    results = sweep(jobs, parallelism=args.parallelism)
    for r in results:
        status = "ok" if r.ok else "FAILED"
        print(f"{status:6} {r.name} -> {r.out_dir}")
        if not r.ok:
            print(r.error, file=sys.stderr)
    return 0 if all(r.ok for r in results) else 1


def cmd_tours(args) -> int:
    trips = read_trips(args.trips)
    tours = extract_tours(build_graph(trips), args.min_len, args.max_len)
    write_tours(args.out, tours)
    print(
        f"{len(tours)} tours from {len(trips)} trips "
        f"({100 * retention_rate(trips, tours):.1f}% of trips used) -> {args.out}"
    )
    return 0


def cmd_report(args) -> int:
    src = Path(args.metrics)
    if src.is_dir():
        src = src / METRICS_FILE
    metrics = MetricsRecord.load(src)
    out = Path(args.out) if args.out else src.parent
    for path in report(metrics, out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evcharge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", "-c", required=True)
    p.add_argument("--out", "-o")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=int, help="override duration_steps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="simulate several scenarios / seeds")
    p.add_argument("configs", nargs="+")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--seeds", type=int, nargs="*")
    p.add_argument("--duration", type=int)
    p.add_argument("--parallelism", "-j", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tours-extract", help="build vehicle tours from a trip file")
    p.add_argument("--trips", required=True)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=4)
    p.set_defaults(func=cmd_tours)

    p = sub.add_parser("report", help="write CSV reports from a metrics.json")
    p.add_argument("--metrics", "-m", required=True, help="metrics.json or a run directory")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ContractError, OSError, ValueError) as exc:
        print(f"evcharge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
