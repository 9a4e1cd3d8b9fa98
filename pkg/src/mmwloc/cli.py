"""Command-line entry point.

    mmwloc <subcommand> [--config PATH] [--seed N] [--out DIR] [--scenes N]
                        [--workers N] [subcommand options]

Subcommands: generate, sound, estimate, classify, locate, export-refine,
ingest-refine, eval, complexity, run.  `run` executes the whole primary
pipeline; `--stage NAME` restarts it from a later stage using the artifacts
already in the run directory.  Exit codes: 0 success, 2 configuration error,
3 stage failure.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .config import load_config
from .errors import ConfigError, MmwlocError, StageError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmwloc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="run directory override")
        p.add_argument("--scenes", type=int, help="scene count override")
        p.add_argument("--workers", type=int, help="worker pool size override")
        return p

    for name in ("generate", "sound", "estimate", "locate", "export-refine", "complexity"):
        common(sub.add_parser(name))
    p = common(sub.add_parser("classify"))
    p.add_argument("--matcher", choices=("model", "true"), help="label source")
    p = common(sub.add_parser("ingest-refine"))
    p.add_argument("--predictions", required=True, help="predicted tile-map JSONL")
    p = common(sub.add_parser("eval"))
    p.add_argument("--locations", help="locations artifact to score")
    p.add_argument("--label", default="initial", help="report label suffix")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p = common(sub.add_parser("run"))
    p.add_argument("--stage", default="generate", help="first stage to execute")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            "seed": args.seed,
            "out_dir": args.out,
            "scenes": args.scenes,
            "workers": args.workers,
        }
        if getattr(args, "matcher", None):
            overrides["matcher"] = args.matcher
        if getattr(args, "no_figures", False):
            overrides["figures"] = False
        cfg = load_config(args.config, overrides)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        if args.command == "generate":
            harness.stage_generate(cfg)
        elif args.command == "sound":
            harness.stage_sound(cfg)
        elif args.command == "estimate":
            harness.stage_estimate(cfg)
        elif args.command == "classify":
            harness.stage_classify(cfg)
        elif args.command == "locate":
            harness.stage_locate(cfg)
        elif args.command == "export-refine":
            harness.stage_export_refine(cfg)
        elif args.command == "ingest-refine":
            harness.stage_ingest_refine(cfg, args.predictions)
        elif args.command == "eval":
            harness.stage_eval(cfg, args.locations, args.label)
        elif args.command == "complexity":
            counts = harness.complexity_report(cfg)
            print(f"{'method':<12}{'operation count':>24}")
            for name in ("omp", "momp", "two_stage"):
                print(f"{name:<12}{counts[name]:>24.3e}")
        elif args.command == "run":
            harness.run(cfg, start_stage=args.stage)
    except StageError as err:
        print(f"pipeline failure: {err}", file=sys.stderr)
        return 3
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except MmwlocError as err:
        print(f"pipeline failure: stage '{args.command}': {err}", file=sys.stderr)
        return 3
    except Exception as err:  # missing artifacts, bad files: stage failures
        print(f"pipeline failure: stage '{args.command}': {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
