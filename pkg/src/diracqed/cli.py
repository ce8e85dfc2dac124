"""Command line entry point: ``sim run``, ``sim preset``, ``sim compare``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, preset
from .errors import SimulationError
from .runner import compare, format_report, run


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="Driven qubit-cavity Dirac dynamics simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config", type=Path)

    pr = sub.add_parser("preset", help="emit a preset config")
    pr.add_argument("name", help=", ".join(PRESETS))
    pr.add_argument("--out", type=Path, help="write to this file instead of stdout")

    c = sub.add_parser("compare", help="deviation report between two run directories")
    c.add_argument("dir_a", type=Path)
    c.add_argument("dir_b", type=Path)
    c.add_argument("--json", type=Path, help="also write the report as JSON")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.cmd == "run":
            out = run(args.config)
            print(out)
        elif args.cmd == "preset":
            text = preset(args.name)
            if args.out:
                args.out.write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
        else:
            report = compare(args.dir_a, args.dir_b)
            print(format_report(report))
            if args.json:
                args.json.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except SimulationError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0
