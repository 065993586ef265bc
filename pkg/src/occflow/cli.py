"""Command line entry point: ``occflow simulate|train|evaluate|ablate|gallery``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import OccflowError

log = logging.getLogger("occflow")

COMMANDS = ("simulate", "train", "evaluate", "ablate", "gallery")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occflow", description="One-class colony-state detection on optical flow")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--stage", action="append", choices=pipeline.STAGE_ORDER,
                        help="train only this stage (repeatable); default: every stage in order")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel scoring workers for evaluate")
    parser.add_argument("--dry-run", action="store_true", help="print the resolved config and stage graph, then exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def dry_run(ws: pipeline.Workspace, command: str) -> dict:
    graph = {stage: list(ups) for stage, (ups, _) in pipeline.STAGES.items()}
    return {"command": command, "config": ws.config.to_dict(), "config_hash": ws.config.digest(),
            "dataset_root": str(ws.dataset_root), "stages": graph, "status": ws.status()}


def run(args) -> int:
    overrides = {"out_dir": args.out} if args.out else None
    cfg = load_config(args.config, overrides)
    ws = pipeline.Workspace.from_config(cfg)
    if args.dry_run:
        print(json.dumps(dry_run(ws, args.command), indent=2, default=str))
        return 0
    if args.command == "simulate":
        print(pipeline.simulate_dataset(ws))
    elif args.command == "train":
        hashes = pipeline.train(ws, args.stage)
        print(json.dumps(hashes, indent=2))
    elif args.command == "evaluate":
        run_dir = pipeline.evaluate(ws, jobs=args.jobs)
        print(run_dir)
    elif args.command == "ablate":
        print(pipeline.ablate(ws))
    elif args.command == "gallery":
        print(pipeline.gallery(ws))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except OccflowError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
