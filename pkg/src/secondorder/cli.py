"""Command line entry point.

    secondorder run --scenario fig2 --engine both --out results/
    secondorder selftest --seed 7
    secondorder print-config --config my.toml

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 selftest acceptance failure. Progress goes to stderr; stdout carries the
JSON summary (or the config text for ``print-config``).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ScenarioConfig, load_config, serialize_config, with_overrides
from .errors import ConfigParseError, NumericalError, ValidationError
from .scenarios import progress, run_scenario, summary_json, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_SELFTEST = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="config file (TOML key = value with [sections])")
    common.add_argument("--scenario", metavar="NAME", help="fig2, fig3a, fig3bc, custom or selftest")
    common.add_argument("--engine", metavar="NAME", help="analytic, montecarlo or both")
    common.add_argument("--seed", metavar="N", type=int, help="64-bit run seed")
    common.add_argument("--realizations", metavar="N", type=int, help="Monte Carlo realizations")
    common.add_argument("--workers", metavar="N", type=int, help="worker processes for Monte Carlo batches")
    common.add_argument("--out", metavar="PATH", help="output directory for CSV files")

    parser = _Parser(prog="secondorder", description="Second-order interference of chaotic light through two remote double slits.")
    sub = parser.add_subparsers(dest="command", metavar="{run,selftest,print-config}", parser_class=_Parser)
    sub.required = True
    sub.add_parser("run", parents=[common], help="run a scenario and write CSVs")
    sub.add_parser("selftest", parents=[common], help="run the acceptance suite (fixed realization counts)")
    sub.add_parser("print-config", parents=[common], help="print the effective configuration")
    return parser


def _effective_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.command == "selftest":
        cfg = replace(cfg, scenario="selftest", scan=None)
    cfg = with_overrides(
        cfg,
        scenario=args.scenario,
        engine=args.engine,
        seed=args.seed,
        n_realizations=args.realizations,
        workers=args.workers,
        output_path=args.out,
    )
    return cfg


def _selftest(cfg: ScenarioConfig) -> int:
    from .acceptance import format_report, run_selftest

    report = run_selftest(cfg)
    write_outputs(report.output, cfg.output_path)
    progress(format_report(report))
    sys.stdout.write(summary_json(report.output.summary))
    return EXIT_OK if report.passed else EXIT_SELFTEST


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _effective_config(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "print-config":
        sys.stdout.write(serialize_config(cfg))
        return EXIT_OK
    try:
        if cfg.scenario == "selftest":
            return _selftest(cfg)
        output = run_scenario(cfg)
        paths = write_outputs(output, cfg.output_path)
        progress(f"wrote {len(paths)} files to {cfg.output_path}")
        sys.stdout.write(summary_json(output.summary))
        return EXIT_OK
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
