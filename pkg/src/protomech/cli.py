"""Command line entry point.

    protomech run <config.json> [--out-dir DIR] [--seed N]
    protomech suite {conservation,oracles,all}

Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 suite failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .scenario import ConfigError, ScenarioError, parse_config, run_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_SUITE = 0, 1, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="protomech", description="Lie-Poisson and protomechanics scenario runner")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one JSON scenario")
    run.add_argument("config")
    run.add_argument("--out-dir", default="out")
    run.add_argument("--seed", type=int, default=None)
    suite = sub.add_parser("suite", help="run an acceptance suite")
    suite.add_argument("name")
    return ap


def _err(msg, quiet):
    if not quiet:
        print(msg, file=sys.stderr)


def main(argv=None, quiet=False):
    args = _parser().parse_args(argv)
    if args.command == "suite":
        from .checks import SUITES, format_table, run_checks

        if args.name not in SUITES:
            _err(f"error: unknown suite {args.name!r}; valid suites: {', '.join(sorted(SUITES))}", quiet)
            return EXIT_VALIDATION
        results = run_checks(args.name)
        if not quiet:
            print(format_table(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_SUITE

    if args.seed is not None and args.seed < 0:
        _err("error: --seed must be nonnegative", quiet)
        return EXIT_VALIDATION
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        _err(f"error: cannot read {args.config}: {exc.strerror}", quiet)
        return EXIT_VALIDATION
    try:
        scenario = parse_config(text)
    except ConfigError as exc:
        _err(f"invalid scenario {args.config}: {exc}", quiet)
        return EXIT_VALIDATION
    try:
        report = run_scenario(scenario, args.out_dir, seed=args.seed)
    except ScenarioError as exc:
        _err(f"error: {exc}", quiet)
        return EXIT_RUNTIME
    if not quiet:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
