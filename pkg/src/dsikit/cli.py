"""Command-line entry point.

Subcommands: ingest | train-segmenter | segment | embed | dsi | analyze
| compare-backends.  All take ``--config`` (JSON) plus optional
``--out``, ``--seed``, ``--jobs`` overrides.

Exit codes: 0 success, 1 usage/configuration error, 2 data or integrity
error, 3 acceptance-threshold failure (compare-backends).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import (
    CacheSpecMismatch,
    ConfigError,
    CorruptCache,
    DocumentNotFound,
    DsikitError,
    IntegrityError,
    ProviderFailure,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_THRESHOLD = 3

_STAGES = {
    "ingest": pipeline.run_ingest,
    "train-segmenter": pipeline.run_train_segmenter,
    "segment": pipeline.run_segment,
    "embed": pipeline.run_embed,
    "dsi": pipeline.run_dsi,
    "analyze": pipeline.run_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsikit",
        description="Divergent semantic integration scoring and analysis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*_STAGES, "compare-backends"]:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--jobs", type=int, help="override document parallelism")
        if name == "compare-backends":
            p.add_argument("--threshold", type=float, default=1e-5,
                           help="max tolerated |reference - blocked| per document")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: getattr(args, k)
        for k in ("out", "seed", "jobs")
        if getattr(args, k) is not None
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with pipeline.output_lock(Path(cfg.out_dir)):
            if args.command == "compare-backends":
                result = pipeline.run_compare_backends(cfg, threshold=args.threshold)
                print(f"compare-backends: max |delta| = {result['max_abs_delta']:.3e} "
                      f"(threshold {args.threshold:.1e})")
                return EXIT_OK if result["pass"] else EXIT_THRESHOLD
            result = _STAGES[args.command](cfg)
            counts = ", ".join(f"{k}={v}" for k, v in result.items()
                               if k != "duration_s")
            print(f"{args.command}: {counts}")
            if args.command == "ingest" and result.get("rejected"):
                print(f"warning: {result['rejected']} line(s) rejected; "
                      f"see rejects.jsonl", file=sys.stderr)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CacheSpecMismatch, CorruptCache, DocumentNotFound, IntegrityError,
            ProviderFailure) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: missing input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DsikitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
