"""Command-line interface: single episodes, batch suites, log replay, and the
live session service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import SimConfig
from .harness import episode_result_from_log, read_log, run_episode, run_suite
from .pipeline import METHODS


def _load_config(path: str | None) -> SimConfig:
    if path is None:
        return SimConfig.default()
    return SimConfig.load(path)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"{args.scenario}_{args.method}_seed{args.seed}.jsonl"
    result = run_episode(cfg, args.scenario, args.method, args.seed, log_path=log_path)
    print(json.dumps({"log": str(log_path), **result.metrics_dict()}, indent=1))
    return 0


def _cmd_suite(args) -> int:
    cfg = _load_config(args.config)
    scenarios = args.scenarios.split(",") if args.scenarios else sorted(cfg.workspace.scenarios)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    seeds = range(args.seeds)
    result = run_suite(cfg, scenarios, methods, seeds, out_dir=args.out, jobs=args.jobs)
    for agg in result["aggregates"]:
        print(
            f"{agg['scenario']:>4} {agg['method']:>5} n={agg['n']:<3}"
            f" time={agg['completion_time_mean']:.2f}s"
            f" disagreement={agg['disagreement_mean']:.4f}"
            f" align={agg['alignment_time_mean']:.2f}s"
            f" min_m={agg['min_manipulability_mean']:.4f}"
            f" success={agg['success_rate']:.2f}"
        )
    print(f"results written to {args.out}/results.csv and results.json")
    return 0


def _cmd_replay(args) -> int:
    meta, records = read_log(args.log)
    result = episode_result_from_log(meta, records)
    print(
        json.dumps(
            {
                "scenario": meta["scenario"],
                "method": meta["method"],
                "seed": meta["seed"],
                "ticks": len(records),
                **result.metrics_dict(),
            },
            indent=1,
        )
    )
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    cfg = _load_config(args.config)
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend"
        if (bundled / "index.html").exists():
            static = str(bundled)
    serve(cfg, host=args.host, port=args.port, log_dir=args.log_dir, static_dir=static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iagf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scripted episode and write its log")
    run.add_argument("--scenario", required=True, choices=["s1", "s2", "s3"])
    run.add_argument("--method", required=True, choices=list(METHODS))
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--config", default=None)
    run.add_argument("--out", default="runs")
    run.set_defaults(func=_cmd_run)

    suite = sub.add_parser("suite", help="run scenarios x methods x seeds and aggregate")
    suite.add_argument("--config", default=None)
    suite.add_argument("--out", default="suite_out")
    suite.add_argument("--seeds", type=int, default=10)
    suite.add_argument("--scenarios", default=None, help="comma-separated subset")
    suite.add_argument("--methods", default=None, help="comma-separated subset")
    suite.add_argument("--jobs", type=int, default=1)
    suite.set_defaults(func=_cmd_suite)

    replay = sub.add_parser("replay", help="recompute metrics from a persisted log")
    replay.add_argument("--log", required=True)
    replay.set_defaults(func=_cmd_replay)

    serve_p = sub.add_parser("serve", help="start the live session service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=None)
    serve_p.add_argument("--config", default=None)
    serve_p.add_argument("--log-dir", default="session_logs")
    serve_p.add_argument("--static", default=None, help="directory with the built UI bundle")
    serve_p.set_defaults(func=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
