"""Command-line entry point: ``netsparse run | plots | validate-graph``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .comm_graph import read_edge_list, validate
from .errors import NetsparseError
from .harness import emit_plot_data, resolve_scenario, run_scenario


def _cmd_run(args) -> int:
    config = resolve_scenario(args.scenario)
    overrides = {k: v for k, v in (("steps", args.steps), ("seed", args.seed)) if v is not None}
    config = config.with_(**overrides)
    result = run_scenario(config, out_dir=args.out, strict_bounds=args.strict_bounds)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    violations = result.summary["dominance_violations"]
    if violations:
        print(f"error: {violations} compressed steps exceeded the tho0 error bound", file=sys.stderr)
        return 2
    return 0


def _cmd_plots(args) -> int:
    for key, path in emit_plot_data(args.trace, args.out).items():
        print(f"{key}: {path}")
    return 0


def _cmd_validate_graph(args) -> int:
    edges = read_edge_list(args.edges)
    L = args.subsystems
    if L is None:
        L = max((max(e) for e in edges), default=0)
    graph = validate(edges, L)
    print(f"ok: L={graph.L}, rounds={graph.max_path_len}")
    for t, part in enumerate(graph.partition, start=1):
        print(f"  depth {t}: {sorted(part)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netsparse")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a closed-loop scenario")
    run.add_argument("--scenario", required=True, help="preset name or key=value config file")
    run.add_argument("--steps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=None, help="directory for trace.csv, summary.json, messages.csv")
    run.add_argument("--strict-bounds", action="store_true", help="abort when the error exceeds its bound")
    run.set_defaults(func=_cmd_run)

    plots = sub.add_parser("plots", help="split a trace into per-figure CSVs")
    plots.add_argument("--trace", required=True)
    plots.add_argument("--out", required=True)
    plots.set_defaults(func=_cmd_plots)

    vg = sub.add_parser("validate-graph", help="check an edge list forms a valid aggregation tree")
    vg.add_argument("--edges", required=True)
    vg.add_argument("--subsystems", type=int, default=None, help="default: largest vertex id")
    vg.set_defaults(func=_cmd_validate_graph)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NetsparseError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
