"""Command line entry point.

    syncrelay run SCENARIO --out rows.csv [--events events.csv] [--summary]
    syncrelay validate SCENARIO
    syncrelay version

Exit codes: 0 success, 1 invalid scenario, 2 numerical divergence,
3 run finished with a latched protection trip.
"""

import argparse
import json
import sys

from . import __version__
from .errors import NumericalDivergenceError, ScenarioError
from .scenario import load_scenario_file
from .simulation import run_scenario, summarize, write_csv, write_events

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2
EXIT_TRIPPED = 3


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load(path):
    try:
        return load_scenario_file(path)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from exc


def _cmd_run(args):
    cfg = _load(args.scenario)
    precision = cfg.precision if args.precision is None else args.precision
    try:
        log = run_scenario(cfg)
    except NumericalDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.log is not None:
            _write(args.out, write_csv(exc.log, precision))
            if args.events:
                _write(args.events, write_events(exc.log, precision))
        return EXIT_DIVERGED
    _write(args.out, write_csv(log, precision))
    if args.events:
        _write(args.events, write_events(log, precision))
    summary = summarize(log)
    if args.summary:
        print(json.dumps({
            "synced": summary.synced,
            "t_close": summary.t_close,
            "close_dphi": summary.close_dphi,
            "trips": [{"element": r.element.value, "t": r.t_trip,
                       "measured": r.measured_value, "threshold": r.threshold}
                      for r in summary.trips],
            "settle_time": summary.settle_time,
        }, indent=2))
    return EXIT_TRIPPED if summary.trips else EXIT_OK


def _cmd_validate(args):
    _load(args.scenario)
    print(f"{args.scenario}: ok")
    return EXIT_OK


def _cmd_version(_args):
    print(__version__)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="syncrelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write the row log")
    run.add_argument("scenario")
    run.add_argument("--out", required=True, help="CSV row log path")
    run.add_argument("--events", help="event log CSV path")
    run.add_argument("--summary", action="store_true", help="print headline metrics as JSON")
    run.add_argument("--precision", type=int, help="override the scenario's decimal places")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="parse and check a scenario file")
    val.add_argument("scenario")
    val.set_defaults(func=_cmd_validate)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=_cmd_version)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
