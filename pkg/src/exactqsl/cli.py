"""Command-line front end.

    exactqsl verify-ur --scenario example1
    exactqsl bounds --scenario my.json --format csv
    exactqsl sweep --scenario example1 --axis hamiltonian.n_z --values 0.1,0.5,0.9 --jobs 4
    exactqsl optimize --scenario sigma-x
    exactqsl report a.json b.json > all.csv

Exit codes: 0 success, 2 scenario validation error, 3 numerical non-convergence,
4 fixture regression mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import runner
from .errors import NoImprovementError, NumericalError, ScenarioError, StepResolutionError
from .scenario import builtin_fixtures, load_scenario_data, parse_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_REGRESSION = 4


def _load(args) -> dict:
    data = load_scenario_data(args.scenario)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.steps is not None:
        data["steps"] = args.steps if args.steps == "auto" else int(args.steps)
    return data


def _steps_arg(text: str):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer or 'auto'") from None
    return value


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _render(rows, fmt: str, extra=None) -> str:
    if fmt == "csv":
        return runner.rows_to_csv(rows)
    if len(rows) == 1 and extra is None:
        return runner.dumps_json(runner.row_to_dict(rows[0]))
    if extra is not None:
        return runner.dumps_json({**runner.row_to_dict(rows[0]), "optimization": extra})
    return runner.dumps_json([runner.row_to_dict(r) for r in rows])


def _single(args) -> int:
    data = _load(args)
    sc = parse_scenario(data)
    row, res = runner.run_command(args.command, sc, args.tolerance_profile, args.timing)
    extra = runner.optimization_payload(res) if res is not None else None
    _emit(_render([row], args.format or "json", extra), args.output)
    problems = runner.check_expectations(row, sc.expect)
    for p in problems:
        print(f"regression mismatch in {sc.name}: {p}", file=sys.stderr)
    return EXIT_REGRESSION if problems else EXIT_OK


def _parse_values(text: str) -> list:
    try:
        values = json.loads(f"[{text}]")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse sweep values: {exc.msg}", "--values") from None
    return values


def _sweep(args) -> int:
    data = _load(args)
    parse_scenario(data)  # the template itself must be valid
    rows = runner.run_sweep(data, args.axis, _parse_values(args.values), args.row_command,
                            args.tolerance_profile, args.jobs, args.timing)
    _emit(_render(rows, args.format or "csv"), args.output)
    return EXIT_OK


def _report(args) -> int:
    rows = []
    for path in args.files:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", path) from None
        for item in data if isinstance(data, list) else [data]:
            if not isinstance(item, dict) or "scenario" not in item:
                raise ScenarioError("not a report row", path)
            rows.append(runner.row_from_dict(item))
    _emit(runner.rows_to_csv(rows), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exactqsl", description="Exact quantum speed limit toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p, default_format: str):
        p.add_argument("--scenario", required=True,
                       help=f"scenario JSON file or built-in fixture ({', '.join(builtin_fixtures())})")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help=f"output format (default {default_format})")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--steps", type=_steps_arg, default=None, help="override steps (integer or 'auto')")
        p.add_argument("--tolerance-profile", choices=tuple(runner.PROFILES), default="default")
        p.add_argument("--timing", action="store_true",
                       help="record runtime_ms (makes output non-reproducible)")
        p.add_argument("--output", "-o", default=None, help="write to this file instead of stdout")

    for name, text in (("verify-ur", "check the exact uncertainty relation along the trajectory"),
                       ("bounds", "evaluate every time estimate and speed limit"),
                       ("optimize", "search for the fastest constant Hamiltonian to the target")):
        scenario_flags(sub.add_parser(name, help=text), "json")

    sw = sub.add_parser("sweep", help="one report row per value of a scenario field")
    scenario_flags(sw, "csv")
    sw.add_argument("--axis", required=True, help="dotted field path, e.g. hamiltonian.n_z or horizon_T")
    sw.add_argument("--values", required=True, help="comma-separated JSON values, e.g. 0.1,0.2,0.3")
    sw.add_argument("--row-command", choices=("bounds", "verify-ur", "optimize"), default="bounds")
    sw.add_argument("--jobs", type=int, default=1, help="rows computed concurrently")

    rp = sub.add_parser("report", help="aggregate JSON report rows into one CSV")
    rp.add_argument("files", nargs="+")
    rp.add_argument("--output", "-o", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return _report(args)
        if args.command == "sweep":
            return _sweep(args)
        return _single(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, StepResolutionError, NoImprovementError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
