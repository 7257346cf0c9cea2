#!/usr/bin/env python3
"""
UD Kalman Filter Runner
=======================
Entry point for the command-line tool.

Requirements
------------
    pip install -r requirements.txt

Usage
-----
    python main.py run scenarios/constant_velocity.yaml [--out results/]
    python main.py stress --max-exp 12 --trials 100 --seed 7 [--workers 4]
    python main.py validate scenarios/range_bearing.yaml
    python main.py selftest

Exit codes: 0 success, 1 scenario or argument error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from cli.report import (
    format_stress,
    format_summary,
    write_stress_csv,
    write_summary_json,
    write_trajectory_csv,
)
from cli.runner import run_scenario
from cli.scenario import ScenarioError, parse_scenario
from cli.selftest import run_selftest
from cli.stress import stress_benchmark
from core.errors import UDFilterError
from version import SCHEMA_VERSION, __version__

logger = logging.getLogger("udkf")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="udkf",
        description="UD-factorized extended Kalman filter: scenario runner and checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({SCHEMA_VERSION})")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="filter a scenario and write the trajectory and summary")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, default=None,
                     help="output directory (default: paths from the scenario's output block)")

    stress = sub.add_parser("stress", help="UD vs naive dense update on ill-conditioned priors")
    stress.add_argument("--max-exp", type=float, required=True, help="largest condition exponent (<= 14)")
    stress.add_argument("--step", type=float, default=2.0, help="exponent spacing from 0 (default: 2)")
    stress.add_argument("--trials", type=int, required=True)
    stress.add_argument("--seed", type=int, required=True)
    stress.add_argument("--workers", type=int, default=1)
    stress.add_argument("--out", type=Path, default=None, help="CSV file for the per-trial table")

    validate = sub.add_parser("validate", help="parse and check a scenario without running it")
    validate.add_argument("scenario", type=Path)

    selftest = sub.add_parser("selftest", help="run the built-in property and oracle checks")
    selftest.add_argument("--seed", type=int, default=0)
    return parser


# ── Commands ──────────────────────────────────────────────────────────────────

def cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_scenario(args.scenario)
    report = run_scenario(cfg)
    stem = cfg.name or args.scenario.stem

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        csv_path: Optional[Path] = args.out / f"{stem}.csv"
        json_path: Optional[Path] = args.out / f"{stem}.json"
    else:
        csv_path = Path(cfg.output["csv"]) if "csv" in cfg.output else None
        json_path = Path(cfg.output["report"]) if "report" in cfg.output else None

    if csv_path is not None:
        write_trajectory_csv(report, csv_path)
    if json_path is not None:
        write_summary_json(report, json_path)
    print(format_summary(report))
    return EXIT_OK if report.ok else EXIT_NUMERICAL


def cmd_stress(args: argparse.Namespace) -> int:
    if args.step <= 0.0:
        raise ValueError("--step must be positive")
    exponents = [float(e) for e in np.arange(0.0, args.max_exp + 0.5 * args.step, args.step)]
    if exponents and exponents[-1] > args.max_exp:
        exponents[-1] = args.max_exp
    report = stress_benchmark(exponents, args.trials, args.seed, workers=args.workers)
    if args.out is not None:
        write_stress_csv(report, args.out)
    print(format_stress(report))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = parse_scenario(args.scenario)
    print(f"ok: {args.scenario} ({cfg.schema}) model={cfg.model} n={cfg.n} q={cfg.q} m={cfg.m} "
          f"steps={cfg.steps} mode={cfg.mode}")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(args.seed)
    for res in results:
        print(f"  [{'ok' if res.passed else 'FAIL':>4}] {res.name:<26} {res.detail}")
    failed = sum(not res.passed for res in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


COMMANDS = {
    "run": cmd_run,
    "stress": cmd_stress,
    "validate": cmd_validate,
    "selftest": cmd_selftest,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UDFilterError as exc:
        print(f"[numerical failure] {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
