"""Command-line entry point: ``nflas <command> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import sys

from .config import CATALOG, ConfigError, load_config
from .estimators import NumericalError
from .runners import RUNNERS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nflas", description="Near-field localization and sensing toolkit.")
    p.add_argument("--list-scenarios", action="store_true", help="print the scenario catalog and exit")
    sub = p.add_subparsers(dest="command")
    for name in RUNNERS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="scenario TOML file")
        s.add_argument("--out", required=True, help="output directory")
    return p


def list_scenarios() -> str:
    lines = []
    for e in CATALOG:
        status = "supported: " + ", ".join(e.commands) if e.supported else "out of scope"
        lines.append(f"{e.id:5s}  {e.title:48s}  {status}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.list_scenarios:
        print(list_scenarios())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        report = RUNNERS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{report.scenario} {report.command}: wrote {len(report.outputs) + 1} files to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
