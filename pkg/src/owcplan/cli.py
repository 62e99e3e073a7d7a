"""Command-line orchestration: trace, allocate, report.

Exit codes: 0 on success, 2 when the allocation is infeasible, 1 on any
other error.  Channel traces are cached under the output directory, keyed
by a content hash of the scenario config plus trace parameters; identical
manifests produce byte-identical outputs regardless of worker count
(``OWCPLAN_WORKERS``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .allocation import build_problem, solve
from .channel import (ChannelMatrix, TraceParams, cache_key,
                      compute_channel_matrix)
from .milp import build_milp, export_lp
from .report import UserReportRow, build_report_rows, emit_report
from .scene import ScenarioConfig, builtin_scenario

RESULT_VERSION = 1


def _load_scenario(args) -> ScenarioConfig:
    if args.scenario and args.config:
        raise ValueError("give either --scenario or --config, not both")
    if args.scenario:
        return builtin_scenario(args.scenario)
    if args.config:
        return ScenarioConfig.load(args.config)
    raise ValueError("one of --scenario or --config is required")


def _trace_params(args) -> TraceParams:
    kwargs = {}
    if getattr(args, "bin_width", None) is not None:
        kwargs["bin_width_s"] = args.bin_width
    return TraceParams(**kwargs)


def _cache_path(out_dir: str, config: ScenarioConfig,
                params: TraceParams) -> str:
    key = cache_key(config.content_hash(), params)
    return os.path.join(out_dir, f"channel_{key[:16]}.json")


def _obtain_matrix(config: ScenarioConfig, params: TraceParams,
                   out_dir: str, no_cache: bool) -> tuple[ChannelMatrix, str]:
    os.makedirs(out_dir, exist_ok=True)
    path = _cache_path(out_dir, config, params)
    if not no_cache and os.path.exists(path):
        matrix = ChannelMatrix.load_cache(path)
        if matrix.scenario_hash == config.content_hash():
            print(f"channel cache hit: {path}")
            return matrix, path
        print(f"channel cache stale, retracing: {path}")
    matrix = compute_channel_matrix(config, params)
    matrix.save_cache(path)
    print(f"channel trace written: {path}")
    return matrix, path


def cmd_trace(args) -> int:
    config = _load_scenario(args)
    params = _trace_params(args)
    _obtain_matrix(config, params, args.out, args.no_cache)
    return 0


def _result_doc(config, result, rows) -> dict:
    return {
        "version": RESULT_VERSION,
        "scenario": config.name,
        "scenario_hash": config.content_hash(),
        "solver": result.solver,
        "objective": result.objective_value,
        "sinr_threshold_db": config.sinr_threshold_db,
        "assignment": [list(c) for c in result.assignment.choices],
        "rows": [row.__dict__ for row in rows],
    }


def cmd_allocate(args) -> int:
    config = _load_scenario(args)
    params = _trace_params(args)
    matrix, _ = _obtain_matrix(config, params, args.out, args.no_cache)
    problem = build_problem(config, matrix)

    if args.solver == "export-only":
        model = build_milp(problem, alpha=args.alpha)
        path = os.path.join(args.out, "model.lp")
        export_lp(model, path)
        print(f"MILP exported: {path}")
        return 0

    result = solve(problem, args.solver)
    print(f"solver {result.solver}: {result.nodes_explored} nodes in "
          f"{result.wall_time_s:.2f} s")
    if not result.feasible:
        print(f"infeasible: {result.message}", file=sys.stderr)
        return 2
    rows = build_report_rows(config, problem, result, matrix)
    result_path = os.path.join(args.out, "allocation.json")
    with open(result_path, "w", encoding="utf-8") as fh:
        json.dump(_result_doc(config, result, rows), fh, sort_keys=True,
                  indent=1)
        fh.write("\n")
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    written = emit_report(rows, formats, args.out)
    print(f"result written: {result_path}")
    for path in written:
        print(f"report written: {path}")
    return 0


def cmd_report(args) -> int:
    if not os.path.exists(args.result):
        raise FileNotFoundError(f"result file not found: {args.result}")
    with open(args.result, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt result file {args.result}: {exc}") from exc
    if doc.get("version") != RESULT_VERSION:
        raise ValueError(f"unsupported result version in {args.result}")
    rows = [UserReportRow(**r) for r in doc["rows"]]
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    os.makedirs(args.out, exist_ok=True)
    for path in emit_report(rows, formats, args.out):
        print(f"report written: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="owcplan",
        description="Indoor optical-wireless planning: channel tracing and "
                    "optimal AP/wavelength/branch assignment")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p):
        p.add_argument("--scenario", choices=["office", "cabin", "datacentre"],
                       help="built-in scenario name")
        p.add_argument("--config", help="path to a scenario config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--bin-width", type=float, default=None,
                       help="impulse-response bin width in seconds")
        p.add_argument("--no-cache", action="store_true",
                       help="ignore and overwrite any existing channel cache")

    p_trace = sub.add_parser("trace", help="trace the optical channel")
    add_scenario_args(p_trace)
    p_trace.set_defaults(func=cmd_trace)

    p_alloc = sub.add_parser("allocate", help="optimize the assignment")
    add_scenario_args(p_alloc)
    p_alloc.add_argument("--solver", default="bnb",
                         choices=["bnb", "exhaustive", "export-only"])
    p_alloc.add_argument("--alpha", type=float, default=None,
                         help="big-M constant for the MILP export")
    p_alloc.add_argument("--formats", default="csv,json,svg",
                         help="comma-separated report formats")
    p_alloc.set_defaults(func=cmd_allocate)

    p_rep = sub.add_parser("report", help="regenerate reports from a result")
    p_rep.add_argument("--result", required=True,
                       help="path to an allocation.json result file")
    p_rep.add_argument("--out", default="out", help="output directory")
    p_rep.add_argument("--formats", default="csv,json,svg")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
