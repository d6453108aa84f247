"""Command-line front-end: scenario replay and the benchmark harness.

Exit codes: 0 all expectations met, 1 at least one expectation mismatch,
2 configuration or parse error (argparse uses 2 for bad flags as well).
"""

from __future__ import annotations

import argparse
import sys

from .bench import BENCH_CALLS, results_csv, sacl_scaling, summary_table
from .engine import ScenarioError, run_scenario
from .guest import GuestError
from .mediator import AuthConfig, PolicyOptions
from .sacl import Sacl, SaclParseError, parse_sacl
from .trap import CostModel, TrapMode


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvguard",
        description="Replay guest-syscall scenarios against a shadow ACL, or benchmark the trap stack.",
    )
    parser.add_argument("--sacl", metavar="FILE", help="shadow ACL file")
    parser.add_argument("--scenario", metavar="FILE", help="JSON-lines scenario trace")
    parser.add_argument(
        "--whitelist-exec",
        action="store_true",
        help="deny exec of targets without a SACL entry",
    )
    parser.add_argument(
        "--auth-secrets",
        metavar="FILE",
        help="challenge-response secrets, lines of '<uid> <secret>'; listed uids require 2-step auth",
    )
    parser.add_argument("--auth-window", type=int, default=300, metavar="TICKS")
    parser.add_argument(
        "--trap-mode", choices=["classic", "nop"], default="classic",
        help="4-switch breakpoint handling or 2-switch NOP-prologue handling",
    )
    parser.add_argument("--switch-cost", type=float, default=1.0, metavar="COST")
    parser.add_argument("--bench", action="store_true", help="run the benchmark instead of a scenario")
    parser.add_argument("--sizes", default="100,1000,10000,100000", metavar="N,N,...")
    parser.add_argument("--reps", type=int, default=1000, metavar="N")
    parser.add_argument("--out", metavar="FILE", help="write the CSV here instead of stdout")
    return parser


def _load_secrets(path: str) -> AuthConfig:
    secrets: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2 or not parts[0].isdigit():
                raise ValueError(f"{path}:{line_no}: expected '<uid> <secret>'")
            secrets[int(parts[0])] = parts[1]
    return AuthConfig(secrets=secrets, enabled_uids=frozenset(secrets))


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_scenario_mode(args) -> int:
    sacl = Sacl()
    if args.sacl:
        with open(args.sacl, encoding="utf-8") as fh:
            sacl = parse_sacl(fh.read())
    auth = AuthConfig(window=args.auth_window)
    if args.auth_secrets:
        base = _load_secrets(args.auth_secrets)
        auth = AuthConfig(secrets=base.secrets, window=args.auth_window, enabled_uids=base.enabled_uids)
    options = PolicyOptions(
        exec_whitelist=args.whitelist_exec,
        trap_mode=TrapMode.NOP2 if args.trap_mode == "nop" else TrapMode.CLASSIC4,
    )
    with open(args.scenario, encoding="utf-8") as fh:
        text = fh.read()
    result = run_scenario(
        text, sacl=sacl, options=options, auth=auth,
        cost_model=CostModel(switch_cost=args.switch_cost),
    )
    _emit(result.simulation.decision_log(), args.out)
    print(
        f"sys events: {result.sys_events}  expect checks: {result.expect_checks}  "
        f"mismatches: {len(result.mismatches)}",
        file=sys.stderr,
    )
    for line in result.mismatches:
        print(f"mismatch: {line}", file=sys.stderr)
    return 1 if result.mismatches else 0


def _run_bench_mode(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if args.reps < 1:
        raise ValueError("--reps must be >= 1")
    mode = TrapMode.NOP2 if args.trap_mode == "nop" else TrapMode.CLASSIC4
    cost_model = CostModel(switch_cost=args.switch_cost)
    results = []
    for call in BENCH_CALLS:
        results.extend(sacl_scaling(call, sizes, args.reps, trap_mode=mode, cost_model=cost_model))
    _emit(results_csv(results), args.out)
    if args.out:
        print(summary_table(results))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.bench:
            if args.scenario:
                raise ValueError("--bench and --scenario are mutually exclusive")
            return _run_bench_mode(args)
        if not args.scenario:
            raise ValueError("either --scenario or --bench is required")
        return _run_scenario_mode(args)
    except (OSError, SaclParseError, ScenarioError, GuestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
