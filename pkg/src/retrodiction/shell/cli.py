"""Command-line entry point: ``retrodiction {run,verify,sweep,schema}``.

Exit status is 0 on success, 1 when a check fails or the engine errors, and
2 for usage or scenario-file errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ScenarioError
from .runner import RunError, run, sweep
from .scenario import load_scenario, schema_text
from .verify import SUITES, verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrodiction",
                                     description="Predictive and retrodictive open-system evolution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="output directory (overrides the scenario)")
    p.add_argument("--steps-override", type=int)

    p = sub.add_parser("verify", help="run a built-in verification suite")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True, help="dotted path, e.g. model.two_level.V")
    p.add_argument("--values", required=True, type=_values, help="comma-separated values")
    p.add_argument("--out")
    p.add_argument("--steps-override", type=int)
    p.add_argument("--workers", type=int, default=1)

    sub.add_parser("schema", help="print the scenario JSON schema")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "schema":
        print(schema_text())
        return EXIT_OK
    if args.command == "verify":
        report = verify(args.suite, args.seed)
        print(report.summary())
        return EXIT_OK if report.passed else EXIT_FAIL
    if getattr(args, "steps_override", None) is not None and args.steps_override < 1:
        print("error: --steps-override must be positive", file=sys.stderr)
        return EXIT_USAGE

    try:
        sc = load_scenario(args.scenario)
        if args.command == "run":
            reports = [run(sc, args.out, args.steps_override)]
        else:
            reports = [sweep(sc, args.param, args.values, args.out, args.steps_override,
                             workers=args.workers)]
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for report in reports:
        print(report.summary())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
