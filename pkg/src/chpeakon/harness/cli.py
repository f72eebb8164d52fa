"""Command-line entry point: ``chpeakon {simulate,metric,approx,verify}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from ..dynamics import PeakonError
from .commands import COMMANDS
from .scenario import Scenario, ScenarioError
from .suites import SUITES

log = logging.getLogger("chpeakon")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chpeakon", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--out", help="directory for CSV and JSON outputs")
        p.add_argument("--seed-suite", choices=sorted(SUITES),
                       help="verification suite to run (verify only)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            sc = Scenario.load(args.config)
        elif args.command == "verify":
            sc = Scenario(name="verify")
        else:
            raise ScenarioError(f"{args.command} needs --config")
        if args.seed_suite:
            if args.command != "verify":
                raise ScenarioError("--seed-suite only applies to verify")
            sc = replace(sc, suite=args.seed_suite)
        record = COMMANDS[args.command](sc)
    except (ScenarioError, PeakonError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for v in record.verdicts:
        print(v.line())
    out = args.out or sc.out
    if out:
        for path in record.write(out):
            log.info("wrote %s", path)
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
