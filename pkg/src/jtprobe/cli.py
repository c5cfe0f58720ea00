"""``jt-probe`` command-line entry point.

Exit codes: 0 success, 1 error, 2 finished but flagged as not converged.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import JTProbeError
from .experiments import EXPERIMENTS, convergence_report, run_experiment

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def parse_assignments(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def read_config(path) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return parse_assignments(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jt-probe", description="Driven dissipative Jahn-Teller probe experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run an experiment and write CSV"), ("converge", "refinement report over cutoffs and steps")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("experiment", choices=sorted(EXPERIMENTS))
        p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                       help="override a parameter (frequencies in kHz); repeatable")
        p.add_argument("--config", help="file of key=value lines applied before --set")
        p.add_argument("--out", help="CSV path (default: <experiment>.csv or <experiment>-convergence.csv)")
        if name == "converge":
            p.add_argument("--cutoffs", help="comma-separated Fock cutoffs to sweep")
    sub.add_parser("list", help="list experiments and their default parameters")
    return parser


def _overrides(args) -> dict:
    values = read_config(args.config) if args.config else {}
    values.update(parse_assignments(args.sets))
    return values


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        for name, exp in EXPERIMENTS.items():
            print(f"{name}: {exp.description}")
            for key, value in exp.defaults.items():
                print(f"    {key} = {value}")
        return EXIT_OK
    try:
        overrides = _overrides(args)
        if args.command == "run":
            result = run_experiment(args.experiment, overrides)
            out = Path(args.out or f"{args.experiment}.csv")
        else:
            cutoffs = [int(c) for c in args.cutoffs.split(",")] if args.cutoffs else None
            result = convergence_report(args.experiment, overrides, cutoffs=cutoffs)
            out = Path(args.out or f"{args.experiment}-convergence.csv")
        result.write_csv(out)
    except (JTProbeError, ValueError, OSError) as exc:
        print(f"jt-probe: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    converged = result.metadata.get("converged", True)
    print(f"wrote {out} ({len(result.rows)} rows, converged={converged})")
    return EXIT_OK if converged is True else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
