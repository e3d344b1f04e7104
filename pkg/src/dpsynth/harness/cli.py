"""``dpsynth`` command line: synth, evaluate, report, pipeline."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..data import DataError, SchemaError
from ..privacy import PrivacyError
from .config import ConfigError, load_config
from .runner import (
    EXIT_DEGRADED,
    EXIT_FAILED,
    EXIT_OK,
    HarnessError,
    cmd_evaluate,
    cmd_pipeline,
    cmd_report,
    cmd_synth,
    load_context,
)

log = logging.getLogger("dpsynth")

HARD_FAILURES = (ConfigError, HarnessError, SchemaError, DataError, PrivacyError, OSError)


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="run configuration (INI)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", type=Path, help="override the output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    p.add_argument("--unsafe-public-fallback", action="store_true",
                   help="group variables on the original when no public data is configured (leaks)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsynth", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("synth", help="write synthetic replicate bundles"))
    ev = sub.add_parser("evaluate", help="compute utility metrics for bundles")
    _common(ev)
    ev.add_argument("bundles", nargs="*", type=Path, help="bundle directories (default: the configured grid)")
    rp = sub.add_parser("report", help="tables and radar charts from a report")
    rp.add_argument("report", type=Path, help="report.json written by evaluate")
    rp.add_argument("--out", type=Path, help="directory for tables and charts (default: next to the report)")
    _common(sub.add_parser("pipeline", help="synth, evaluate and report in sequence"))
    return parser


def _context(args):
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be nonnegative")
    cfg = load_config(args.config, seed=args.seed, out=args.out)
    return load_context(cfg, unsafe_public_fallback=args.unsafe_public_fallback)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            files, notes = cmd_report(args.report, args.out)
            for note in notes:
                print(note, file=sys.stderr)
            for f in files:
                print(f)
            return EXIT_OK
        ctx = _context(args)
        jobs = max(1, args.jobs)
        if args.command == "synth":
            for d in cmd_synth(ctx, jobs=jobs):
                print(d)
            return EXIT_OK
        if args.command == "evaluate":
            _, degraded = cmd_evaluate(ctx, args.bundles or None, jobs=jobs)
            print(ctx.cfg.out / "report.json")
            return EXIT_DEGRADED if degraded else EXIT_OK
        code = cmd_pipeline(ctx, jobs=jobs)
        print(ctx.cfg.out / "report.json")
        return code
    except HARD_FAILURES as exc:
        print(f"dpsynth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILED


def main() -> None:
    sys.exit(run())
