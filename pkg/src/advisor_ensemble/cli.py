"""Command-line entry point: ``advisor-ensemble <command> --config FILE``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import AdvisorEnsembleError
from .pipeline import COMMAND_STAGES, report, run_pipeline

DEFAULT_OUT = "advisor-ensemble-out"

HELP = {
    "ingest-check": "read, align and split the data; write the provenance manifest",
    "select-features": "ingest, then rank and select features per advisor",
    "train": "select features, then train the bagged stacked ensembles",
    "online": "train, then run the online weighting over the validation period",
    "backtest": "online weighting, then the trading backtest",
    "compare": "online weighting, then the static baseline comparison",
    "run": "the full pipeline",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advisor-ensemble", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMAND_STAGES:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, type=Path, help="YAML config file")
        p.add_argument("--out", type=Path, help="output directory (default: output_dir from the config)")
        p.add_argument("--seed", type=int, help="override the master seed")
        grid = p.add_mutually_exclusive_group()
        grid.add_argument("--grid", dest="grid", action="store_true", default=None,
                          help="also run the (f, lambda) grid; uses the config grid or a built-in one")
        grid.add_argument("--no-grid", dest="grid", action="store_false", help="skip the grid")
        p.add_argument("--timings", type=Path, help="write stage wall times as JSON here (outside the bundle)")
    p = sub.add_parser("report", help="verify a bundle's checksums and print its summary")
    p.add_argument("bundle", type=Path)
    return parser


def _out_dir(args, cfg) -> Path:
    if args.out is not None:
        return args.out
    if cfg.output_dir is not None:
        return cfg.output_dir if cfg.output_dir.is_absolute() else args.config.parent / cfg.output_dir
    return Path(DEFAULT_OUT)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            sys.stdout.write(report(args.bundle))
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        timings = {}
        out = run_pipeline(cfg, _out_dir(args, cfg), args.command, args.grid, timings)
        if args.timings:
            args.timings.write_text(json.dumps(timings, indent=2) + "\n")
        sys.stdout.write((out / "summary.txt").read_text())
        print(f"bundle written to {out}")
        return 0
    except AdvisorEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
