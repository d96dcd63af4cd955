"""Command-line entry point: ``kppdomain <verb> --config cfg.yaml``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import scenarios

VERB_KIND = {
    "eigen": "eigen",
    "exhaustion": "exhaustion",
    "lieb": "lieb",
    "spectrum": "spectrum",
    "decompose": "decompose",
    "steady": "steady",
    "uniqueness": "uniqueness",
    "nonuniq": "nonuniqueness",
    "hair-trigger": "hair_trigger",
    "bulb": "bulb",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kppdomain", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in list(VERB_KIND) + ["suite"]:
        s = sub.add_parser(verb)
        if verb == "suite":
            s.add_argument("suite_file", nargs="?", default=None, help="suite YAML (default: shipped paper_checks)")
            s.add_argument("--workers", type=int, default=1, help="scenarios run concurrently")
            s.add_argument("--only", nargs="*", help="run only these scenario names")
        else:
            s.add_argument("--config", required=True, help="scenario YAML")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--dump-fields", action="store_true", help="write field dumps")
        s.add_argument("--serial", action="store_true", help="force one worker thread")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.serial:
        os.environ["KPPDOMAIN_THREADS"] = "1"

    if args.verb == "suite":
        path = args.suite_file or scenarios.shipped_suite()
        try:
            summary = scenarios.run_suite(path, args.out or "out", 1 if args.serial else args.workers, args.only)
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        for r in summary["scenarios"]:
            print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']} (exit {r['exit_code']})")
        print(f"{summary['passed']}/{summary['total']} scenarios passed")
        return summary["exit_code"]

    try:
        cfg = scenarios.load_config(args.config)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if isinstance(cfg, dict):
        kind = VERB_KIND[args.verb]
        cfg.setdefault("kind", kind)
        if cfg["kind"] != kind:
            print(f"error: config kind {cfg['kind']!r} does not match verb {args.verb!r}", file=sys.stderr)
            return 2
    rep = scenarios.run_scenario(cfg, args.out, args.dump_fields or None)
    if "error" in rep.data:
        print(f"error ({rep.data['stage']}): {rep.data['error']}", file=sys.stderr)
    else:
        print(json.dumps(rep.data["results"], indent=2, sort_keys=True, default=str))
        status = "PASS" if rep.data["acceptance"]["passed"] else "FAIL"
        print(f"{status} {rep.data['config']['name']}")
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
