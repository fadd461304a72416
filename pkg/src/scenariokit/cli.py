"""Command-line interface.

Exit codes: 0 success, 1 domain failure (invalid element, ``comprises`` false,
failed simulation), 2 usage error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import uuid
from pathlib import Path
from typing import Sequence

from . import conditions
from .matching import comprises, parse_tag_query, select
from .model import Scenario, ScenarioCategory, validate
from .persistence import (
    DuplicateUid,
    Library,
    PersistenceError,
    ValidationFailed,
    load,
)
from .policies import POLICIES, make_policy, parse_policy_args
from .simulation import SimConfig, SimulationError, run_test_scenario, simulate, write_events_csv, write_trace_csv
from .tags import TagError

OK, DOMAIN, USAGE, IO = 0, 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code, self.message = code, message


def _library(path: str | None) -> Library | None:
    if path is None:
        return None
    try:
        return Library(path)
    except PersistenceError as exc:
        raise _Exit(IO, str(exc)) from None


def _load(path: str, library: Library | None):
    try:
        return load(path, library)
    except ValidationFailed:
        raise
    except PersistenceError as exc:
        raise _Exit(IO, str(exc)) from None


def cmd_validate(args) -> int:
    library = _library(args.library)
    try:
        element = _load(args.file, library)
    except ValidationFailed as exc:
        print(exc.report)
        return DOMAIN
    if isinstance(element, (Scenario, ScenarioCategory)):
        print(validate(element, library.registry if library else None))
    else:
        print("valid")
    return OK


def cmd_simulate(args) -> int:
    library = _library(args.library)
    try:
        scenario = _load(args.file, library)
    except ValidationFailed as exc:
        print(exc.report, file=sys.stderr)
        return DOMAIN
    if not isinstance(scenario, Scenario):
        raise _Exit(USAGE, f"{args.file} holds a {type(scenario).__name__}, not a scenario")
    try:
        config = SimConfig(dt=args.dt, t_max=args.t_max)
    except ValueError as exc:
        raise _Exit(USAGE, str(exc)) from None
    try:
        ego = scenario.ego()
        if scenario.activities_of(ego):
            trace = simulate(scenario, config)
        else:
            if args.policy is None:
                raise _Exit(USAGE, f"ego {ego.uid!r} has no activities; choose --policy from {sorted(POLICIES)}")
            try:
                policy = make_policy(args.policy, parse_policy_args(args.policy_args))
            except ValueError as exc:
                raise _Exit(USAGE, str(exc)) from None
            trace = run_test_scenario(scenario, policy, config)
    except (SimulationError, conditions.ConditionError) as exc:
        print(f"simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(trace, fh)
        if args.events:
            with open(args.events, "w", encoding="utf-8", newline="") as fh:
                write_events_csv(trace, fh)
    except OSError as exc:
        raise _Exit(IO, f"cannot write output: {exc}") from None
    print(f"outcome: {', '.join(trace.outcome)}")
    return OK


def cmd_match(args) -> int:
    library = _library(args.library)
    try:
        category = _load(args.category, library)
        scenario = _load(args.scenario, library)
    except ValidationFailed as exc:
        print(exc.report, file=sys.stderr)
        return DOMAIN
    if not isinstance(category, ScenarioCategory):
        raise _Exit(USAGE, f"--category {args.category} holds a {type(category).__name__}")
    if not isinstance(scenario, Scenario):
        raise _Exit(USAGE, f"--scenario {args.scenario} holds a {type(scenario).__name__}")
    result = comprises(category, scenario, library.registry if library else None)
    print(f"comprises: {'true' if result else 'false'}")
    return OK if result else DOMAIN


def cmd_query(args) -> int:
    library = _library(args.library)
    try:
        query = parse_tag_query(args.tags, library.registry)
        scenarios = library.scenarios()
    except TagError as exc:
        raise _Exit(IO, str(exc)) from None
    except ValidationFailed as exc:
        raise _Exit(IO, str(exc)) from None
    except PersistenceError as exc:
        raise _Exit(IO, str(exc)) from None
    except ValueError as exc:
        raise _Exit(USAGE, str(exc)) from None
    for s in select(scenarios, query, library.registry):
        print(s.uid)
    return OK


def cmd_index(args) -> int:
    root = Path(args.library)
    if not root.is_dir():
        raise _Exit(IO, f"{root} is not a directory")
    try:
        library = Library(root, use_index=False)
        entries = library.rebuild_index(write=True)
    except DuplicateUid as exc:
        print(exc, file=sys.stderr)
        return DOMAIN
    except PersistenceError as exc:
        raise _Exit(IO, str(exc)) from None
    print(f"indexed {len(entries)} uids in {len(library.files)} files")
    return OK


def cmd_new_uid(args) -> int:
    for _ in range(args.count):
        print(uuid.uuid4())
    return OK


def cmd_export_fixtures(args) -> int:
    from .pedestrian_crossing import export_fixtures

    try:
        for path in export_fixtures(args.out):
            print(path)
    except (OSError, PersistenceError) as exc:
        raise _Exit(IO, str(exc)) from None
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenariokit", description="Driving-scenario definitions and execution")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario, category or tag-tree file")
    p.add_argument("--file", required=True)
    p.add_argument("--library")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run a scenario and write its trace")
    p.add_argument("--file", required=True)
    p.add_argument("--out", required=True, help="trace CSV")
    p.add_argument("--dt", type=float, default=SimConfig.dt)
    p.add_argument("--t-max", type=float, default=SimConfig.t_max)
    p.add_argument("--policy", choices=sorted(POLICIES), help="ego policy for test scenarios")
    p.add_argument("--policy-args", help="policy parameters as k=v,k2=v2")
    p.add_argument("--events", help="event log CSV")
    p.add_argument("--library")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("match", help="does a category comprise a scenario?")
    p.add_argument("--category", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--library")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("query", help="list scenarios whose tags satisfy an expression")
    p.add_argument("--library", required=True)
    p.add_argument("--tags", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("index", help="rebuild a library's index file")
    p.add_argument("--library", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("new-uid", help="print fresh UUID-shaped identifiers")
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_new_uid)

    p = sub.add_parser("export-fixtures", help="write the bundled example library to a directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _Exit as exc:
        if exc.message:
            print(f"error: {exc.message}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
