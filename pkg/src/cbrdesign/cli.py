"""Command-line front end.

Three subcommands: ``solve`` (approximate or exact, JSON output), ``sweep``
(rho grid over the built-in line example, CSV output), ``evaluate``
(criterion value, per-term breakdown and feasibility of a given design).

Exit codes: 0 optimal / completed, 2 infeasible, 3 iteration or node limit
reached with an incumbent, 4 input error (bad usage, config, or design
file), 5 numerical failure.  Log verbosity comes from the CBRDESIGN_LOG
environment variable (DEBUG/INFO/WARNING/ERROR); --quiet forces ERROR.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .errors import CbrdesignError, ConfigError, DomainError
from .model import Design, cbrc_term_values, cbrc_value, check_feasible
from .config import design_from_file, load_config, problem_from_config
from .exact import DEFAULT_GAP_TOL, DEFAULT_NODE_LIMIT, solve_exact
from .socp import DEFAULT_TOL, solve_approximate
from . import rcr

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_INPUT = 4
EXIT_NUMERICAL = 5

_STATUS_EXIT = {
    "optimal": EXIT_OK,
    "infeasible": EXIT_INFEASIBLE,
    "node-limit": EXIT_LIMIT,
    "gap-limit": EXIT_LIMIT,
    "numerical-failure": EXIT_NUMERICAL,
    "unbounded": EXIT_NUMERICAL,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code collides with 'infeasible'."""

    def error(self, message):
        raise _UsageError(message)


def _json_value(v: float):
    return float(v) if math.isfinite(v) else None


def _value_text(v: float) -> str:
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def _configure_logging(quiet: bool) -> None:
    level_name = os.environ.get("CBRDESIGN_LOG", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    if quiet:
        level = logging.ERROR
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _design_json(design: Design) -> dict:
    return {
        "labels": list(design.space.labels),
        "weights": [float(w) for w in design.weights],
    }


def cmd_solve(args) -> int:
    doc = load_config(args.config)
    problem = problem_from_config(doc)
    start = time.perf_counter()
    out: dict = {
        "mode": args.mode,
        "flags": {
            "tol": args.tol,
            "gap_tol": args.gap_tol,
            "node_limit": args.node_limit,
            "seed": args.seed,
        },
    }
    if args.mode == "exact":
        problem = problem.with_integrality(True)
        result = solve_exact(
            problem,
            gap_tol=args.gap_tol,
            node_limit=args.node_limit,
            log_interval=args.log_interval,
        )
        status = result.status
        out.update(
            {
                "status": status,
                "criterion_value": _json_value(result.incumbent_value),
                "criterion_value_text": _value_text(result.incumbent_value),
                "best_bound": _json_value(result.best_bound),
                "gap": _json_value(result.gap),
                "nodes": result.nodes,
                "ties": result.ties,
                "root_relaxation": _json_value(result.root_relaxation),
            }
        )
        if result.incumbent is not None:
            out["design"] = _design_json(result.incumbent)
            out["term_values"] = [
                _json_value(v) for v in cbrc_term_values(problem, result.incumbent)
            ]
    else:
        result = solve_approximate(problem, tol=args.tol)
        status = result.status
        out.update(
            {
                "status": status,
                "criterion_value": _json_value(result.value),
                "criterion_value_text": _value_text(result.value),
            }
        )
        if result.solution is not None:
            out["gap"] = _json_value(result.solution.gap)
            out["solver_status"] = result.solution.solver_status
            out["iterations"] = result.solution.iterations
        if result.design is not None:
            out["design"] = _design_json(result.design)
            out["term_values"] = [
                _json_value(v) for v in cbrc_term_values(problem, result.design)
            ]
    out["wall_time_s"] = time.perf_counter() - start
    _write_output(json.dumps(out, indent=2) + "\n", args.output)
    return _STATUS_EXIT.get(status, EXIT_NUMERICAL)


def _sweep_grid(start: float, stop: float, step: float) -> list[float]:
    if not (0.0 < start < stop < 1.0):
        raise _UsageError("sweep needs 0 < start < stop < 1")
    if step <= 0.0:
        raise _UsageError("sweep needs step > 0")
    grid = []
    k = 0
    while True:
        rho = start + k * step
        if rho > stop + 1e-12:
            break
        grid.append(min(rho, stop))
        k += 1
    if not grid:
        raise _UsageError("empty sweep grid")
    return grid


def cmd_sweep(args) -> int:
    doc = load_config(args.config)
    crit = doc.get("criterion", {})
    if crit.get("type") != "paper_example":
        raise ConfigError(
            'sweep needs the built-in line example (criterion.type "paper_example"); '
            "only its rho parameter is swept",
            path="$.criterion.type",
        )
    spaced = bool(crit.get("with_constraint10", False))
    grid = _sweep_grid(args.start, args.stop, args.step)

    probe = rcr.line_example(grid[0], spaced=spaced)
    labels = probe.space.labels
    header = (
        ["rho"]
        + [f"w_{lab}" for lab in labels]
        + ["criterion_value", "status", "gap", "nodes"]
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    worst = EXIT_OK
    for rho in grid:
        row: list[str] = [repr(float(rho))]
        try:
            problem = rcr.line_example(rho, spaced=spaced)
            if args.mode == "exact":
                problem = problem.with_integrality(True)
                res = solve_exact(
                    problem,
                    gap_tol=args.gap_tol,
                    node_limit=args.node_limit,
                    log_interval=args.log_interval,
                )
                design = res.incumbent
                value = res.incumbent_value
                status = res.status
                gap = res.gap
                nodes = res.nodes
            else:
                res = solve_approximate(problem, tol=args.tol)
                design = res.design
                value = res.value
                status = res.status
                gap = res.solution.gap if res.solution is not None else math.nan
                nodes = 0
        except CbrdesignError as exc:
            log.warning("rho=%s failed: %s", rho, exc)
            row += [""] * len(labels) + ["", "error", "", ""]
            writer.writerow(row)
            worst = max(worst, EXIT_NUMERICAL)
            continue
        if design is not None:
            row += [repr(float(w)) for w in design.weights]
        else:
            row += [""] * len(labels)
        row += [
            _value_text(value) if design is not None else "",
            status,
            repr(float(gap)) if math.isfinite(gap) else "",
            str(nodes),
        ]
        writer.writerow(row)
        worst = max(worst, _STATUS_EXIT.get(status, EXIT_NUMERICAL))
    _write_output(buf.getvalue(), args.output)
    return worst


def cmd_evaluate(args) -> int:
    doc = load_config(args.config)
    problem = problem_from_config(doc)
    design = design_from_file(args.design, problem.space)
    terms = cbrc_term_values(problem, design)
    value = float(sum(terms))
    report = check_feasible(problem.constraints, design)
    lines = [f"criterion_value {_value_text(value)}"]
    for j, t in enumerate(terms):
        lines.append(f"term[{j + 1}] {_value_text(t)}")
    lines.append(f"feasible {'true' if report.feasible else 'false'}")
    for v in report.violations:
        lines.append(f"violation {v.name} {v.kind} {v.amount:.6e}")
    _write_output("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbrdesign", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, mode: bool = True) -> None:
        p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                       help="interior-point tolerance (default 1e-8)")
        p.add_argument("--gap-tol", type=float, default=DEFAULT_GAP_TOL,
                       help="exact-mode optimality gap (default 1e-6)")
        p.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT,
                       help="exact-mode node cap (default 100000)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed recorded in outputs (reserved for randomized features)")
        p.add_argument("--quiet", action="store_true", help="log errors only")
        p.add_argument("--log-interval", type=int, default=0,
                       help="log search progress every N nodes (0 = off)")
        p.add_argument("-o", "--output", default=None,
                       help="output file (default stdout)")
        if mode:
            p.add_argument("--mode", choices=("approximate", "exact"),
                           default="approximate")

    p_solve = sub.add_parser("solve", help="solve one problem from a config file")
    p_solve.add_argument("config")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="solve the built-in line example over a rho grid")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--start", type=float, required=True)
    p_sweep.add_argument("--stop", type=float, required=True)
    p_sweep.add_argument("--step", type=float, default=0.005,
                         help="rho increment (default 0.005)")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_eval = sub.add_parser("evaluate", help="evaluate a design against a config")
    p_eval.add_argument("config")
    p_eval.add_argument("design")
    common(p_eval, mode=False)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _configure_logging(getattr(args, "quiet", False))
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CbrdesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry_point() -> None:
    sys.exit(main())
