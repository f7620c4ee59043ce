"""Operator command line.

Subcommands: ``validate``, ``replay``, ``simulate``, ``report``, ``serve``.
Machine-consumable payloads go to stdout; diagnostics and progress go to
stderr. Exit codes: 0 success, 1 domain error, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path
from typing import Optional

from .core import canonical_json, session_metrics_to_dict
from .engine import replay as engine_replay
from .errors import TrainforgeError
from .parser import parse_scenario
from .report import build_report, render_text
from .simulator import load_profile, simulate
from .store import EventStore

STORE_ENV = "TRAINFORGE_STORE"


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _load_scenario(path: str):
    result = parse_scenario(_read_text(path))
    for diagnostic in result.diagnostics:
        print(str(diagnostic), file=sys.stderr)
    if not result.ok:
        raise SystemExit(1)
    return result.scenario


def _read_events(path: str):
    from .core import event_from_dict

    events = []
    text = _read_text(path)
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(event_from_dict(json.loads(line)))
        except Exception as exc:
            print(f"{path}:{lineno}: bad event record: {exc}", file=sys.stderr)
            raise SystemExit(1)
    return events


def _store_dir(value: Optional[str]) -> str:
    if value:
        return value
    env = os.environ.get(STORE_ENV)
    if env:
        return env
    print(f"no store directory: pass --store or set {STORE_ENV}", file=sys.stderr)
    raise SystemExit(2)


def cmd_validate(args: argparse.Namespace) -> int:
    result = parse_scenario(_read_text(args.file))
    for diagnostic in result.diagnostics:
        print(str(diagnostic), file=sys.stderr)
    if result.ok:
        print(f"{args.file}: ok", file=sys.stderr)
        return 0
    return 1


def cmd_replay(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario)
    events = _read_events(args.trace)
    try:
        metrics = engine_replay(scenario, events, seed=args.seed)
    except TrainforgeError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(canonical_json(session_metrics_to_dict(metrics)))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.n < 1:
        print("-n must be >= 1", file=sys.stderr)
        return 2
    profile = load_profile(_read_text(args.profile))
    scenario = _load_scenario(args.scenario)
    store = EventStore(args.out)
    import random

    master = random.Random(f"cohort:{args.seed}")
    summary = []
    try:
        for _ in range(args.n):
            child_seed = master.getrandbits(63)
            bundle = simulate(profile, scenario, child_seed, store=store)
            summary.append(
                {
                    "session_id": bundle.session_id,
                    "seed": bundle.seed,
                    "metrics": session_metrics_to_dict(bundle.metrics),
                }
            )
    except TrainforgeError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(canonical_json({"scenario_id": scenario.id, "profile": profile.name, "sessions": summary}))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    store = EventStore(_store_dir(args.store))
    try:
        report = build_report(store, scenario_id=args.scenario, mu0=args.mu0)
    except TrainforgeError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.format == "text":
        print(render_text(report), end="")
    else:
        print(canonical_json(report.to_dict()))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.bind, args.port))
    except OSError as exc:
        print(f"cannot bind {args.bind}:{args.port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    static_dir = Path(args.static) if args.static else None
    app = create_app(_store_dir(args.store), static_dir=static_dir)
    uvicorn.run(app, host=args.bind, port=args.port, log_level="warning")
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainforge", description="Adaptive training-scenario engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="recompute metrics from a trace")
    p.add_argument("scenario")
    p.add_argument("trace", help="events.jsonl file")
    p.add_argument("--seed", type=int, default=None, help="assert the trace was recorded under this seed")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simulate", help="run synthetic trainees against a scenario")
    p.add_argument("--profile", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("-n", type=int, required=True, help="sessions to simulate")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="store directory for the trace bundles")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="cohort report over a store")
    p.add_argument("--store", default=None, help=f"store directory (default: ${STORE_ENV})")
    p.add_argument("--scenario", default=None)
    p.add_argument("--format", choices=["text", "machine"], default="text")
    p.add_argument("--mu0", type=float, default=0.5)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--port", type=int, default=8520)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--store", default=None, help=f"store directory (default: ${STORE_ENV})")
    p.add_argument("--static", default=None, help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
