"""Command-line harness.

Subcommands::

    statesecrecy run <config.toml>        Monte Carlo scenario run
    statesecrecy verify <suite>           numerical verification suite
    statesecrecy export-traces <config>   write sampled channel traces

Common flags ``--seed``, ``--runs``, ``--horizon`` override the config;
``--out`` redirects artifacts.  Exit codes: 0 success, 1 validation
error (bad usage, bad config, unknown suite), 2 numeric failure,
3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .gaussians import NumericError
from .runner import export_traces, run_scenario
from .suites import SUITE_NAMES, run_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_VERIFICATION = 3


class _Parser(argparse.ArgumentParser):
    # Usage problems are validation errors under this tool's exit-code
    # contract (argparse would exit with 2, which is reserved).
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="statesecrecy", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config", type=Path)
    _common_flags(run_p)
    run_p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    verify_p = sub.add_parser("verify", help="run a verification suite")
    verify_p.add_argument("suite", help=f"one of: {', '.join(SUITE_NAMES)}")
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--out", type=Path, default=None,
                          help="directory for figure artifacts (figures suite)")

    export_p = sub.add_parser("export-traces", help="sample and write channel traces")
    export_p.add_argument("config", type=Path)
    _common_flags(export_p)
    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)


def _load(args) -> object:
    overrides = {"seed": args.seed, "runs": args.runs, "horizon": args.horizon}
    if args.out is not None:
        # resolve against the caller's working directory, not the config's
        overrides["outputs"] = str(Path(args.out).absolute())
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args)
            if not cfg.system.unstable:
                print(
                    f"warning: spectral radius {cfg.system.rho:.4f} <= 1; secrecy "
                    "guarantees assume an unstable plant", file=sys.stderr,
                )
            _, summary = run_scenario(cfg, workers=args.workers)
            print(json.dumps(summary["scalars"], sort_keys=True))
            print(f"artifacts written to {cfg.outputs}", file=sys.stderr)
            return EXIT_OK
        if args.command == "export-traces":
            cfg = _load(args)
            paths = export_traces(cfg)
            print(f"wrote {len(paths)} traces to {cfg.outputs / 'traces'}", file=sys.stderr)
            return EXIT_OK
        if args.command == "verify":
            try:
                results = run_suite(args.suite, seed=args.seed, out=args.out)
            except ValueError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_VALIDATION
            for result in results:
                print(json.dumps(result.as_dict(), sort_keys=True))
            failed = [r for r in results if not r.passed and not r.skipped]
            print(
                f"{args.suite}: {len(results) - len(failed)}/{len(results)} checks passed",
                file=sys.stderr,
            )
            return EXIT_OK if not failed else EXIT_VERIFICATION
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
