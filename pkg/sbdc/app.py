"""
Command-line front end.

    analyze <scenario.json>
    simulate <scenario.json> [--plot] [--seed N]
    certify <scenario.json>
    reproduce [--json] [--epsilon E] [--emit-scenarios DIR] [--jobs N]

Exit codes: 0 success, 2 a certificate or expected verdict failed,
1 usage, I/O, parse or validation error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from sbdc import __version__
from sbdc.errors import SbdcError
from sbdc.scenario_handler import EXIT_ERROR, EXIT_OK, ScenarioHandler
from utils.logger import logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbdc", description="Secure-by-design consensus toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--out-dir", dest="out_dir", help="Output root (overrides SBDC_OUT_DIR)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", action="store_true", help="Only log warnings and errors")

    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Write the robustness report of a scenario")
    analyze.add_argument("scenario", help="Path to scenario JSON")

    simulate = sub.add_parser("simulate", help="Simulate a scenario and write its trajectory")
    simulate.add_argument("scenario", help="Path to scenario JSON")
    simulate.add_argument("--plot", action="store_true", help="Also write an SVG plot")
    simulate.add_argument("--seed", type=int, default=None, help="Seed for random x0 or attacks")

    certify = sub.add_parser("certify", help="Write only the certificate verdicts")
    certify.add_argument("scenario", help="Path to scenario JSON")

    reproduce = sub.add_parser("reproduce", help="Run the embedded benchmark grid")
    reproduce.add_argument("--json", dest="as_json", action="store_true", help="Machine-readable summary")
    reproduce.add_argument("--epsilon", type=float, default=None, help="Override the discrete-time step size")
    reproduce.add_argument("--emit-scenarios", dest="emit_dir", default=None, help="Write the benchmark scenarios here")
    reproduce.add_argument("--jobs", type=int, default=1, help="Run grid cells concurrently")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.getLogger("sbdc").setLevel(level)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    configure_logging(args.verbose, args.quiet)

    handler = ScenarioHandler(out_dir=args.out_dir)
    if args.command in ("analyze", "certify"):
        kwargs = {"scenario_path": args.scenario}
    elif args.command == "simulate":
        kwargs = {"scenario_path": args.scenario, "plot": args.plot, "seed": args.seed}
    else:
        if args.epsilon is not None and not args.epsilon > 0.0:
            logger.log(f"--epsilon must be > 0, got {args.epsilon}", "ERROR")
            return EXIT_ERROR
        if args.jobs < 1:
            logger.log(f"--jobs must be >= 1, got {args.jobs}", "ERROR")
            return EXIT_ERROR
        kwargs = {"as_json": args.as_json, "epsilon": args.epsilon, "emit_dir": args.emit_dir, "jobs": args.jobs}

    try:
        return handler.execute(args.command, **kwargs)
    except (SbdcError, OSError) as e:
        logger.log(f"{args.command} failed: {e}", "ERROR")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
