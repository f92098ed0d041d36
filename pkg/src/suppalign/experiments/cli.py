"""Command-line entry point: ``suppalign run|list-scenarios|validate``.

Environment overrides (command-line flags win):

``SUPPALIGN_OUT_DIR``
    default output directory (otherwise ``./out``)
``SUPPALIGN_JOBS``
    default worker count (otherwise 1)
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .. import __version__
from .report import emit_report
from .results import summary_dict, write_csv, write_json
from .runners import RUNNERS
from .scenario import ScenarioError, bundled_scenarios, load_scenario

log = logging.getLogger("suppalign")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{name} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="suppalign", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write results")
    run.add_argument("scenario", help="scenario file or bundled scenario name")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default=None, help="output directory (env SUPPALIGN_OUT_DIR)")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (env SUPPALIGN_JOBS)")
    run.add_argument("--only", action="append", choices=sorted(RUNNERS),
                     help="run only this experiment (repeatable)")
    run.add_argument("--report", default=None, metavar="JSON",
                     help="evaluate acceptance criteria and write them to JSON; "
                          "exit 1 if any criterion fails")

    sub.add_parser("list-scenarios", help="list bundled scenarios")

    val = sub.add_parser("validate", help="parse and check a scenario file")
    val.add_argument("scenario")
    return p


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    jobs = args.jobs if args.jobs is not None else _env_int("SUPPALIGN_JOBS", 1)
    if jobs < 1:
        raise SystemExit("--jobs must be >= 1")
    out_root = Path(args.out or os.environ.get("SUPPALIGN_OUT_DIR") or "out")
    out = out_root / scenario.name
    names = [e for e in scenario.experiments if not args.only or e in args.only]
    tables = {}
    for name in names:
        t0 = time.perf_counter()
        log.info("running %s", name)
        tables[name] = RUNNERS[name](scenario, jobs)
        log.info("%s done in %.1f s", name, time.perf_counter() - t0)
        # rewrite after every experiment so an interrupted run keeps what finished
        ordered = list(tables.values())
        write_csv(ordered, out / "results.csv")
        write_json({"scenario": scenario.name, "seed": scenario.seed, "version": __version__,
                    "results": summary_dict(ordered)}, out / "summary.json")
    print(f"wrote {out / 'results.csv'}")
    if args.report:
        results = emit_report(tables, args.report)
        if any(r.passed is False for r in results):
            return 1
    return 0


def _cmd_list(_args) -> int:
    for name, path in sorted(bundled_scenarios().items()):
        sc = load_scenario(path)
        print(f"{name:<14} {', '.join(sc.experiments):<48} {sc.description}")
    return 0


def _cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"{sc.name}: ok (seed {sc.seed}; experiments: {', '.join(sc.experiments) or 'none'})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    handler = {"run": _cmd_run, "list-scenarios": _cmd_list, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
