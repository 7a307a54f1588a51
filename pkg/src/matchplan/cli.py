"""Command-line entry point: ``matchplan <command> --config run.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import pipeline
from .config import CATEGORIES, MODES, ConfigError, RunConfig, atomic_write_text, load_config
from .data import DataError
from .index import IndexFormatError

log = logging.getLogger("matchplan")


def bundled_config(name: str = "desk") -> str:
    return resources.files("matchplan").joinpath("configs", f"{name}.json").read_text()


def _config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig.from_dict(json.loads(bundled_config(args.preset)))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.workdir:
        cfg = cfg.with_workdir(args.workdir)
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (JSON); defaults to the bundled preset")
    common.add_argument("--preset", default="desk", choices=["desk", "small"],
                        help="bundled config used when --config is absent (default: desk)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workdir", help="override the run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="matchplan",
        description="Fielded index scanning with learned match plans.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-corpus", parents=[common], help="write the synthetic corpus and queries")
    sub.add_parser("build-index", parents=[common], help="build the fielded index")
    sub.add_parser("trace-baseline", parents=[common],
                   help="run production plans and cache their traces and rewards")
    sub.add_parser("fit-bins", parents=[common], help="fit the (u, v) state binner")
    p = sub.add_parser("train", parents=[common], help="train one category's policy")
    p.add_argument("--category", required=True, choices=CATEGORIES)
    p = sub.add_parser("evaluate", parents=[common], help="run policy and baseline on a sample")
    p.add_argument("--category", required=True, choices=CATEGORIES)
    p.add_argument("--mode", required=True, choices=MODES)
    p = sub.add_parser("report", parents=[common], help="compare runs, write report and profiles")
    p.add_argument("--out", help="also copy the text report here")
    p = sub.add_parser("run-all", parents=[common], help="every stage in order")
    p.add_argument("--out", help="also copy the text report here")
    p = sub.add_parser("show-config", parents=[common],
                       help="print the effective config and its hash")
    p.add_argument("--out", help="write the config here instead of stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    stage = args.command
    try:
        cfg = _config(args)
        if stage == "show-config":
            if args.out:
                atomic_write_text(args.out, cfg.to_json())
            else:
                sys.stdout.write(cfg.to_json())
            print(f"sha256 {cfg.hash}", file=sys.stderr)
        elif stage == "gen-corpus":
            pipeline.gen_corpus(cfg)
        elif stage == "build-index":
            pipeline.build_index_stage(cfg)
        elif stage == "trace-baseline":
            pipeline.trace_baseline(cfg)
        elif stage == "fit-bins":
            pipeline.fit_bins(cfg)
        elif stage == "train":
            pipeline.train(cfg, args.category)
        elif stage == "evaluate":
            pipeline.evaluate(cfg, args.category, args.mode)
        elif stage in ("report", "run-all"):
            if stage == "run-all":
                pipeline.run_all(cfg)
            else:
                pipeline.report(cfg)
            text = cfg.path("report").read_text()
            if args.out:
                atomic_write_text(args.out, text)
            sys.stdout.write(text)
    except pipeline.StageError as exc:
        print(f"matchplan {exc.stage}: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DataError, IndexFormatError, ValueError, OSError) as exc:
        print(f"matchplan {stage}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
