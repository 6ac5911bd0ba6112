"""Command-line front end.

Subcommands: ``check`` (static checking), ``translate`` (print the
translated core program), ``run`` (translate and execute), and ``litmus``
(run the diagnostic matrix). Exit codes: 0 success/pass, 1 static error,
2 runtime stuck, 3 fuel exhausted, 4 usage error, 5 litmus mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .kafka import print_program
from .litmus import cell_json, render_text, run_matrix
from .parser import ParseError, parse_program
from .surface import StaticTypeErrors
from .translate import MONOTONIC, SEMANTICS_NAMES, Semantics, translate_program
from .vm import DEFAULT_FUEL, FuelExhausted, Stuck, Value, run

EXIT_OK = 0
EXIT_STATIC_ERROR = 1
EXIT_STUCK = 2
EXIT_FUEL = 3
EXIT_USAGE = 4
EXIT_LITMUS_MISMATCH = 5


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 4 on usage errors, not argparse's 2
        raise _UsageError(message)


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="gtkafka", add_help=True)
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="statically check a surface program")
    check.add_argument("path")

    translate = sub.add_parser("translate", help="translate to the core language")
    translate.add_argument("--semantics", required=True, choices=SEMANTICS_NAMES)
    translate.add_argument("path")

    run_cmd = sub.add_parser("run", help="translate and execute")
    run_cmd.add_argument("--semantics", required=True, choices=SEMANTICS_NAMES)
    run_cmd.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    run_cmd.add_argument("--trace", action="store_true",
                         help="emit a JSONL record per step")
    run_cmd.add_argument("path")

    litmus = sub.add_parser("litmus", help="run the litmus matrix")
    litmus.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    litmus.add_argument("--json", action="store_true", dest="json_output",
                        help="emit one JSON record per matrix cell")
    return parser


def _load_program(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            source = handle.read()
    except OSError as err:
        raise _UsageError(f"cannot read {path}: {err}") from None
    return parse_program(source)


def _resolve_semantics(name: str) -> Semantics:
    if name == MONOTONIC:
        raise _UsageError("UnsupportedSemantics: 'monotonic' is only available "
                          "in the litmus matrix")
    return Semantics(name)


def _cmd_check(args) -> int:
    from .surface import check_program

    program = _load_program(args.path)
    check_program(program)
    print("OK")
    return EXIT_OK


def _cmd_translate(args) -> int:
    semantics = _resolve_semantics(args.semantics)
    program = _load_program(args.path)
    table, main = translate_program(semantics, program)
    print(print_program(table, main))
    return EXIT_OK


def _cmd_run(args) -> int:
    semantics = _resolve_semantics(args.semantics)
    program = _load_program(args.path)
    table, main = translate_program(semantics, program)
    outcome, trace = run(table, main, fuel=args.fuel, trace=args.trace)
    if args.trace:
        for record in trace:
            print(json.dumps({
                "step": record.step,
                "redex": record.redex,
                "heap": record.heap_size,
                "classes": record.class_count,
            }))
        print(json.dumps(_final_record(outcome)))
    else:
        print(_outcome_line(outcome, args.fuel))
    if isinstance(outcome, Value):
        return EXIT_OK
    if isinstance(outcome, Stuck):
        return EXIT_STUCK
    return EXIT_FUEL


def _outcome_line(outcome, fuel: int) -> str:
    if isinstance(outcome, Value):
        return f"value #{outcome.address}"
    if isinstance(outcome, Stuck):
        return f"stuck {outcome.kind.value} at {outcome.at}"
    assert isinstance(outcome, FuelExhausted)
    return f"fuel exhausted after {fuel} steps"


def _final_record(outcome) -> dict:
    if isinstance(outcome, Value):
        return {"result": "value"}
    if isinstance(outcome, Stuck):
        return {"result": "stuck", "kind": outcome.kind.value, "at": outcome.at}
    return {"result": "fuel"}


def _cmd_litmus(args) -> int:
    report = run_matrix(fuel=args.fuel)
    if args.json_output:
        for cell in report.cells:
            print(json.dumps(cell_json(cell)))
    else:
        print(render_text(report))
    return EXIT_OK if report.ok else EXIT_LITMUS_MISMATCH


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "translate":
            return _cmd_translate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "litmus":
            return _cmd_litmus(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_STATIC_ERROR
    except StaticTypeErrors as err:
        for item in err.errors:
            print(f"static error: {item}", file=sys.stderr)
        return EXIT_STATIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
