"""Command line front end.

Two subcommands: `run` executes a config and writes its result files;
`report` merges result files into a table (markdown or CSV) and
optionally renders plots.  Exit codes: 0 on success, 2 for config or
schema problems, 3 for computation failures and unusable result files.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .errors import AmalgamLabError, ConfigError
from .runner import render_plots, render_report, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amalgamlab")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute an experiment config")
    runp.add_argument("config", help="path to a config JSON file")
    runp.add_argument("--workers", type=int, default=1, help="concurrent cell workers")
    runp.add_argument("--out", default=".", help="directory for result files")

    repp = sub.add_parser("report", help="tabulate result files")
    repp.add_argument("results", nargs="+", help="result JSON files to merge")
    repp.add_argument("--format", choices=("md", "csv"), default="md")
    repp.add_argument("--plots", action="store_true", help="also write PNG plots")
    repp.add_argument("--out", default=".", help="directory for plot files")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            paths = run(args.config, workers=args.workers, out_dir=args.out)
            print(f"results: {paths['results']}")
            print(f"table:   {paths['table']}")
            print(f"timings: {paths['timings']}")
        else:
            sys.stdout.write(render_report(args.results, fmt=args.format))
            if args.plots:
                for p in render_plots(args.results, out_dir=args.out):
                    print(f"plot: {p}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AmalgamLabError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
