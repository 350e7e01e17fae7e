""" Command line front end: solve, check, render and convert blueprints. """

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import __version__
from .exceptions import BlueprintOptimizerError, DocumentError
from .orchestrator import RunConfig, RunOutcome, optimize
from .parser.blueprint_string import (
    ItemNames,
    export_blueprint_string,
    import_blueprint_string,
)
from .parser.documents import (
    dump_blueprint,
    flow_report_to_document,
    parse_blueprint,
    to_json,
)
from .parser.instance import parse_instance
from .render import RenderStyle, render_ascii
from .utils.formatter import configure_logging
from .validator import simulate_flow, validate_structure

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_LIMIT_REACHED = 2
EXIT_INPUT_ERROR = 3


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _names(path: Optional[str]) -> Optional[ItemNames]:
    if path is None:
        return None
    try:
        table = json.loads(_read(path))
        return ItemNames({int(item): str(name) for item, name in table.items()})
    except (ValueError, AttributeError) as error:
        raise DocumentError(
            f"item name table {path} must map item ids to names"
        ) from error


def _solve(args: argparse.Namespace) -> int:
    inst = parse_instance(_read(args.instance))
    cfg = RunConfig(
        max_stage1_attempts=args.max_attempts,
        stage1_time_limit=args.time_limit,
        stage2_time_limit=args.time_limit,
        stage3_time_limit=args.time_limit,
        conveyor_penalty=args.conveyor_penalty,
        inserter_penalty=args.inserter_penalty,
        assembler_penalty=args.assembler_penalty,
        workers=args.workers,
        dump_dir=Path(args.dump) if args.dump else None,
    )
    report = optimize(inst, cfg)
    for attempt in report.attempts:
        _LOGGER.info(
            "Attempt %s: %s assemblers %s, objective %s, %s packings, %s",
            attempt.index,
            attempt.num_assemblers,
            attempt.recipes,
            attempt.objective_value,
            attempt.packings_tried,
            attempt.rejection or "accepted",
        )
    if report.outcome is RunOutcome.INFEASIBLE:
        print("infeasible")
        return EXIT_INFEASIBLE
    if report.outcome is RunOutcome.LIMIT_REACHED:
        print(f"limit reached: {report.message}")
        return EXIT_LIMIT_REACHED

    bp = report.blueprint
    if args.output:
        Path(args.output).write_text(dump_blueprint(bp), encoding="utf-8")
    sys.stdout.write(render_ascii(bp))
    print(f"predicted rate: {bp.predicted_rate}/min")
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    bp = parse_blueprint(_read(args.blueprint))
    inst = parse_instance(_read(args.instance)) if args.instance else bp.instance
    if inst is None:
        raise DocumentError("blueprint carries no instance, pass --instance")
    problems = validate_structure(bp, inst)
    for problem in problems:
        print(problem)
    if problems:
        return EXIT_INFEASIBLE
    print("valid")
    return EXIT_OK


def _simulate(args: argparse.Namespace) -> int:
    bp = parse_blueprint(_read(args.blueprint))
    inst = parse_instance(_read(args.instance))
    sys.stdout.write(to_json(flow_report_to_document(simulate_flow(bp, inst))))
    return EXIT_OK


def _render(args: argparse.Namespace) -> int:
    bp = parse_blueprint(_read(args.blueprint))
    sys.stdout.write(render_ascii(bp, RenderStyle(legend=args.legend)))
    return EXIT_OK


def _export(args: argparse.Namespace) -> int:
    bp = parse_blueprint(_read(args.blueprint))
    print(export_blueprint_string(bp, _names(args.names)))
    return EXIT_OK


def _import(args: argparse.Namespace) -> int:
    bp = import_blueprint_string(args.string, _names(args.names))
    text = dump_blueprint(bp)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve": _solve,
    "validate": _validate,
    "simulate": _simulate,
    "render": _render,
    "export": _export,
    "import": _import,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="store_true", help="log at DEBUG level"
    )

    parser = argparse.ArgumentParser(
        prog="blueprint-optimizer",
        description="Synthesize and inspect Factorio blueprints",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="optimize an instance")
    solve.add_argument("instance")
    solve.add_argument("--dump", metavar="DIR", help="write every stage result here")
    solve.add_argument(
        "--max-attempts", type=int, default=RunConfig.max_stage1_attempts
    )
    solve.add_argument(
        "--time-limit", type=float, default=0.0, help="seconds per stage solve"
    )
    for name in ("conveyor", "inserter", "assembler"):
        solve.add_argument(
            f"--{name}-penalty", type=int, default=getattr(RunConfig, f"{name}_penalty")
        )
    solve.add_argument("--workers", type=int, default=1)
    solve.add_argument("--output", metavar="FILE", help="write the blueprint file here")

    validate = commands.add_parser(
        "validate", parents=[common], help="check a blueprint"
    )
    validate.add_argument("blueprint")
    validate.add_argument(
        "--instance", help="instance file, default is the embedded one"
    )

    simulate = commands.add_parser(
        "simulate", parents=[common], help="steady state rates"
    )
    simulate.add_argument("blueprint")
    simulate.add_argument("instance")

    render = commands.add_parser("render", parents=[common], help="draw a blueprint")
    render.add_argument("blueprint")
    render.add_argument("--legend", action="store_true")

    export = commands.add_parser(
        "export", parents=[common], help="blueprint string out"
    )
    export.add_argument("blueprint")
    export.add_argument("--names", metavar="FILE", help="JSON table of item names")

    imported = commands.add_parser(
        "import", parents=[common], help="blueprint string in"
    )
    imported.add_argument("string")
    imported.add_argument("--names", metavar="FILE", help="JSON table of item names")
    imported.add_argument("--output", metavar="FILE")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, color=sys.stderr.isatty())
    try:
        return COMMANDS[args.command](args)
    except (BlueprintOptimizerError, OSError) as error:
        _LOGGER.error("%s: %s", args.command, error)
        return EXIT_INPUT_ERROR


def run() -> None:
    sys.exit(main())
