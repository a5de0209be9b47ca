"""Command-line front end.

Every subcommand writes ``report.json`` (also echoed to stdout) into ``--out``
plus the CSVs that belong to it. Exit codes: 0 optimal, 2 infeasible,
3 singular point or divergence, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, replace

import numpy as np

from .bnb import BnbConfig, enumerate_exhaustive, node_log_csv, solve_bnb
from .continuation import ContinuationSchedule, solve_relaxation
from .core import ContractViolation, NodeAssignment, NoSolutionError, PathstableError, Status, relax
from .problems import build_parabola, build_unit_circle

EXIT_OK, EXIT_INFEASIBLE, EXIT_SINGULAR, EXIT_CONFIG = 0, 2, 3, 4
MAX_REPORTED_VARS = 20
PROBLEMS = ("example1", "example2", "river")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _finite(value):
    """JSON-safe value: non-finite floats become null, arrays become lists."""
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_finite(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def dump_report(report: dict) -> str:
    return json.dumps(_finite(report), sort_keys=True, indent=2) + "\n"


def _common(parser):
    d = ContinuationSchedule()
    g = parser.add_argument_group("solver settings")
    g.add_argument("--mu0", type=float, default=d.mu0)
    g.add_argument("--mu-min", type=float, default=d.mu_min)
    g.add_argument("--sigma", type=float, default=d.sigma)
    g.add_argument("--dtheta0", type=float, default=d.dtheta0)
    g.add_argument("--dtheta-min", type=float, default=d.dtheta_min)
    g.add_argument("--newton-tol", type=float, default=d.newton_tol)
    g.add_argument("--max-newton-iter", type=int, default=d.max_newton_iter)
    g.add_argument("--prune-tol", type=float, default=BnbConfig.prune_tol)
    g.add_argument("--queue", choices=("lifo", "fifo", "best"), default="lifo")
    g.add_argument("--branch", choices=("index", "fractional"), default="fractional")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--deterministic", action="store_true", help="one worker, LIFO queue")
    g.add_argument("--out", default="results", help="output directory")


def _river_options(parser):
    g = parser.add_argument_group("river model")
    g.add_argument("--weirs", type=int, default=1)
    g.add_argument("--hydrograph", help="CSV with columns time_s, inflow_m3s")
    g.add_argument("--config", help="YAML model configuration")
    g.add_argument("--horizon-hours", type=float)


def build_parser():
    parser = _Parser(prog="pathstable", description="Global MINLP solver for path-stable problems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("example1", "unit circle toy problem"), ("example2", "branches of a parabola")):
        _common(sub.add_parser(name, help=text))
    p = sub.add_parser("river", help="cascaded river with binary weirs")
    _river_options(p)
    _common(p)
    p = sub.add_parser("enumerate", help="solve every leaf relaxation")
    p.add_argument("problem", choices=PROBLEMS)
    _river_options(p)
    _common(p)
    p = sub.add_parser("trace", help="dump the continuation path of one node")
    p.add_argument("problem", choices=PROBLEMS)
    p.add_argument("--node", required=True, help="bitmask, e.g. 01x (x = free)")
    _river_options(p)
    _common(p)
    return parser


def _schedule(args):
    return ContinuationSchedule(
        mu0=args.mu0,
        mu_min=args.mu_min,
        sigma=args.sigma,
        dtheta0=args.dtheta0,
        dtheta_min=args.dtheta_min,
        newton_tol=args.newton_tol,
        max_newton_iter=args.max_newton_iter,
    )


def _bnb_config(args, schedule):
    return BnbConfig(
        queue=args.queue,
        branch_rule=args.branch,
        prune_tol=args.prune_tol,
        workers=args.workers,
        schedule=schedule,
        deterministic=args.deterministic,
    )


def _river_model(args):
    from .hydro.model import CascadeModel, load_model_config, read_hydrograph

    if args.weirs < 1:
        raise ContractViolation("--weirs must be at least 1")
    model = load_model_config(args.config, args.weirs) if args.config else CascadeModel.default(args.weirs)
    if args.hydrograph:
        model = replace(model, hydrograph=read_hydrograph(args.hydrograph))
    if args.horizon_hours is not None:
        model = model.with_horizon(args.horizon_hours)
    return model


def build_problem(name, args=None):
    if name == "example1":
        return build_unit_circle()
    if name == "example2":
        return build_parabola()
    from .hydro.problem import build_river_problem

    model = _river_model(args)
    return build_river_problem(model.n_weirs, model)


def _exit_code(status):
    if status is Status.OPTIMAL:
        return EXIT_OK
    if status is Status.INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_SINGULAR


def _report_dict(command, problem, report, settings):
    out = {
        "command": command,
        "problem": problem.name,
        "status": report.status.value,
        "objective": report.objective,
        "delta": report.delta_bits(),
        "kkt_residual": report.kkt_residual,
        "mu": report.mu,
        "iterations": dict(report.iterations),
        "nodes_visited": report.nodes_visited,
        "lower_bound": report.lower_bound,
        "warnings": report.warnings,
        "message": report.message,
        "settings": settings,
    }
    if report.x is not None and problem.n_cont <= MAX_REPORTED_VARS:
        out["x"] = list(report.x)
    layout = problem.metadata.get("layout")
    if layout is not None:
        out["objective_scale"] = layout.objective_scale
        if report.x is not None:
            H, _ = layout.unpack(report.x)
            out["level_objective"] = layout.level_objective(H)
            out["max_abs_level"] = float(np.max(np.abs(H)))
    return out


def _write(out_dir, name, text):
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        fh.write(text)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        schedule = _schedule(args)
        config = _bnb_config(args, schedule)
        problem = build_problem(getattr(args, "problem", args.command), args)
        os.makedirs(args.out, exist_ok=True)
    except (ConfigError, ContractViolation, PathstableError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"pathstable: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    settings = {"schedule": asdict(schedule), "queue": config.queue, "branch": config.branch_rule,
                "prune_tol": config.prune_tol, "workers": config.workers, "deterministic": config.deterministic}
    start = time.perf_counter()
    if args.command == "trace":
        try:
            node = NodeAssignment.parse(args.node)
            rel = relax(problem, node)
        except ContractViolation as exc:
            print(f"pathstable: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        report = solve_relaxation(rel, schedule)
        if report.trace is not None:
            _write(args.out, "trace.csv", report.trace.to_csv())
    elif args.command == "enumerate":
        try:
            report = enumerate_exhaustive(problem, schedule)
        except ContractViolation as exc:
            print(f"pathstable: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        rows = ["assignment,status,objective"]
        rows += [f"{r['assignment']},{r['status']},{r['objective']!r}" for r in report.leaf_table]
        _write(args.out, "leaves.csv", "\n".join(rows) + "\n")
    else:
        try:
            report = solve_bnb(problem, config)
        except NoSolutionError as exc:
            report = exc.report
        _write(args.out, "node_log.csv", node_log_csv(report.node_log))
    elapsed = time.perf_counter() - start

    if args.command == "river" and report.ok:
        from .hydro.problem import write_results

        layout = problem.metadata["layout"]
        H, Q = layout.unpack(report.x)
        write_results(os.path.join(args.out, "results.csv"), layout.model, H, Q)

    doc = _report_dict(args.command, problem, report, settings)
    doc["wall_time_s"] = elapsed
    text = dump_report(doc)
    _write(args.out, "report.json", text)
    stdout.write(text)
    return _exit_code(report.status)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
