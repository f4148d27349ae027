"""Command-line entry point: ``run``, ``sweep`` and ``trace`` subcommands."""
from __future__ import annotations

import argparse
import sys

from . import bench


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ramimo", description="Rotatable-antenna MIMO capacity experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one scenario, one scheme, one seed")
    run.add_argument("--config", required=True, help="flat TOML file of scenario and solver keys")
    run.add_argument("--scheme", required=True, choices=bench.SCHEMES)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    sw = sub.add_parser("sweep", help="axis x seeds x schemes table")
    sw.add_argument("--spec", required=True, help="TOML with axis, values, seeds and schemes plus scenario keys")
    sw.add_argument("--out", required=True)
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    sw.add_argument("--summary", help="optional CSV of per-point mean and std")
    sw.add_argument("--workers", type=int, default=1)

    tr = sub.add_parser("trace", help="per-iteration capacity of the proposed scheme")
    tr.add_argument("--config", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--seed", type=int, action="append", help="repeatable; defaults to seed 0")
    tr.add_argument("--scheme", choices=("proposed", "sepm", "rfoa", "tfoa"), default="proposed")
    return ap


def _cmd_run(args) -> None:
    params, cfg = bench.load_config(args.config)
    scenario = bench.generate_scenario(params, args.seed)
    report = bench.run_scheme(scenario, args.scheme, cfg, args.seed, keep_orientations=args.format == "json")
    bench.emit_report([report], args.format, args.out)


def _cmd_sweep(args) -> None:
    spec, params, cfg = bench.load_sweep_spec(args.spec)
    result = bench.run_sweep(spec, params, cfg, workers=args.workers)
    bench.emit_report(result.rows, args.format, args.out)
    if args.summary:
        bench.emit_summary(result.summary, args.summary)


def _cmd_trace(args) -> None:
    params, cfg = bench.load_config(args.config)
    reports = []
    for seed in args.seed or [0]:
        scenario = bench.generate_scenario(params, seed)
        reports.append(bench.run_scheme(scenario, args.scheme, cfg, seed))
    bench.emit_trace(reports, args.out)


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "trace": _cmd_trace}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, TypeError, ArithmeticError) as exc:
        print(f"ramimo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
