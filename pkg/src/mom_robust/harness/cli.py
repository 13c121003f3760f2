"""``mom <command> --config <path.json> [--seed N] [--out <path>]``.

Exit codes: 0 on success, 2 for configuration, parse and I/O errors, 3 for
numeric errors (including inadmissible confidence levels in a coverage run).
"""

from __future__ import annotations

import argparse
import os
import sys

from .. import __version__
from ..errors import ConfigError, NumericError
from .config import Command, kebab, load_config, parse_config
from .experiments import run_experiment
from .io import write_json, write_results

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser():
    p = argparse.ArgumentParser(prog="mom", description="Median-of-means robustness experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", help="one of: " + ", ".join(kebab(c) for c in Command))
    p.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output CSV path; '-' or none prints to stdout")
    return p


def _side_path(out, suffix):
    stem, _ = os.path.splitext(out)
    return f"{stem}.{suffix}"


def run(args):
    if args.config is not None:
        config = load_config(args.config, args.command)
    else:
        config = parse_config({}, args.command)
    config = config.with_overrides(seed=args.seed, output=args.out)
    result = run_experiment(config)
    out = config.output
    text = write_results(out, result.table)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        for name, table in result.traces.items():
            write_results(_side_path(out, f"trace.{name}.csv"), table)
        meta = {
            "version": __version__,
            "config": config.to_dict(),
            "rows": len(result.table.rows),
            "traces": sorted(result.traces),
            "errors": result.errors,
        }
        write_json(_side_path(out, "meta.json"), meta)
    for e in result.errors:
        print(f"mom: {e}", file=sys.stderr)
    return EXIT_NUMERIC if result.errors and config.command is Command.COVERAGE else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"mom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"mom: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
