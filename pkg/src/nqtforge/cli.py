"""``nqtforge <command> --config <path> [options]``"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, PipelineConfig
from .pipeline import STAGES, StageError


def build_parser():
    parser = argparse.ArgumentParser(prog="nqtforge", description="Question to NQT translation pipeline.")
    parser.add_argument("command", choices=sorted(STAGES), help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="flat key = value configuration file")
    parser.add_argument("--endpoint", help="SPARQL endpoint URL (default: the fixture store)")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--audit", action="store_true", default=None, help="write audit.log from correction")
    parser.add_argument("--no-correction", dest="correction", action="store_false", default=None,
                        help="skip the NQT correction stage")
    parser.add_argument("--separator", choices=("sep", "comma"), help="NQT separator style")
    parser.add_argument("--run-dir", help="override the configured run directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.config)
        cfg = cfg.replace(endpoint=args.endpoint, seed=args.seed, audit=args.audit,
                          correction=args.correction, separator=args.separator, run_dir=args.run_dir)
        cfg.__post_init__()
    except ConfigError as exc:
        print(f"nqtforge: [config] {exc}", file=sys.stderr)
        return 2
    try:
        result = STAGES[args.command](cfg)
    except StageError as exc:
        print(f"nqtforge: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # any other failure still names the stage
        print(f"nqtforge: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, dict) and "report" in result:
        print(result["report"], end="")
    else:
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
