"""Command-line interface.

Exit codes: 0 success (``check-set``: independent set), 1 dependent set
(``check-set`` only), 2 bad input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .contextuality import EPS_MODEL, EPS_RANK, rank_test
from .errors import ConfigError, NumericalError, ValidationError
from .maps.schrodinger_newton import EPS_SN_CONV, SNConfig, SNPhaseResult, sn_moment_evolution
from .qstate import load_states
from .scenarios import load_scenario, run_scenario

EXIT_OK = 0
EXIT_DEPENDENT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _fail(msg: str, code: int) -> int:
    print(f"contextlab: {msg}".replace("\n", " "), file=sys.stderr)
    return code


def git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def cmd_run(config_path, report_path, traj_path=None, seed=None,
            eps_rank=EPS_RANK, eps_model=EPS_MODEL) -> int:
    try:
        cfg = load_scenario(config_path)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
    except (ValidationError, OSError) as exc:
        return _fail(f"{config_path}: {exc}", EXIT_CONFIG)
    try:
        report = run_scenario(cfg, eps_rank=eps_rank, eps_model=eps_model)
    except NumericalError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_NUMERIC)
    except ValidationError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_CONFIG)
    Path(report_path).write_text(report.dumps())
    if traj_path is not None:
        Path(traj_path).write_text(report.trajectory_csv())
    return EXIT_OK


def cmd_check_set(states_path, eps_rank=EPS_RANK) -> int:
    try:
        states = load_states(states_path)
    except (ValidationError, OSError) as exc:
        return _fail(f"{states_path}: {exc}", EXIT_CONFIG)
    verdict = rank_test(states, eps_rank)
    print(json.dumps(verdict.to_json()))
    return EXIT_OK if verdict.independent else EXIT_DEPENDENT


def write_sn_csv(result: SNPhaseResult, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNPhaseResult.CSV_COLUMNS)
        for row in result.rows():
            w.writerow([repr(float(x)) for x in row])


def cmd_sn_phase(config_path, alpha2, out_path, eps_conv=EPS_SN_CONV) -> int:
    try:
        alpha2 = float(alpha2)
    except ValueError:
        return _fail(f"alpha2 must be a number, got {alpha2!r}", EXIT_CONFIG)
    if not 0.0 <= alpha2 <= 1.0:
        return _fail(f"alpha2 must lie in [0, 1], got {alpha2}", EXIT_CONFIG)
    try:
        obj = json.loads(Path(config_path).read_text())
        cfg = SNConfig.from_json(obj)
    except json.JSONDecodeError as exc:
        return _fail(f"{config_path}: invalid JSON at line {exc.lineno}: {exc.msg}", EXIT_CONFIG)
    except (ConfigError, ValidationError, OSError) as exc:
        return _fail(f"{config_path}: {exc}", EXIT_CONFIG)
    try:
        result = sn_moment_evolution(cfg, alpha2, eps_conv=eps_conv)
    except NumericalError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_NUMERIC)
    write_sn_csv(result, out_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contextlab",
        description="Contextuality of quantum state sets under nonlinear dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario config and write its report")
    p.add_argument("config")
    p.add_argument("report")
    p.add_argument("--traj", help="write Bloch trajectories as CSV")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--eps-rank", type=float, default=EPS_RANK)
    p.add_argument("--eps-model", type=float, default=EPS_MODEL)

    p = sub.add_parser("check-set", help="rank test on a states file; exit 1 if dependent")
    p.add_argument("states")
    p.add_argument("--eps-rank", type=float, default=EPS_RANK)

    p = sub.add_parser("sn-phase", help="SN branch moments and phases as CSV")
    p.add_argument("config")
    p.add_argument("alpha2")
    p.add_argument("out")
    p.add_argument("--eps-conv", type=float, default=EPS_SN_CONV)

    sub.add_parser("version", help="print version and git revision")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "run":
        return cmd_run(args.config, args.report, args.traj, args.seed, args.eps_rank, args.eps_model)
    if args.command == "check-set":
        return cmd_check_set(args.states, args.eps_rank)
    if args.command == "sn-phase":
        return cmd_sn_phase(args.config, args.alpha2, args.out, args.eps_conv)
    print(f"contextlab {__version__} ({git_hash()})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
