"""Command line entry point: ``kernel-lsq run|validate|plotdata``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .experiment import plotdata, run, validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernel-lsq", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the sweep described by a JSON config")
    p.add_argument("config")
    p = sub.add_parser("validate", help="check a JSON config without running it")
    p.add_argument("config")
    p = sub.add_parser("plotdata", help="melt report CSVs into long format")
    p.add_argument("report_dir")
    p.add_argument("-o", "--output", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            for note in validate(args.config):
                print(f"note: {note}")
            print("ok")
            return EXIT_OK
        if args.command == "run":
            result = run(args.config)
            for name, info in result.manifest["csv"].items():
                print(f"{name}: {result.output_dir / info['path']} ({info['rows']} rows)")
            failed = [r.n for r in result.levels if r.failure]
            if failed:
                print(f"failed levels: {failed}", file=sys.stderr)
            return EXIT_OK if result.status == 0 else EXIT_ALL_FAILED
        out = plotdata(args.report_dir, args.output)
        print(out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
