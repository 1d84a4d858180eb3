"""Command line front: pair-embed extract --tasks T --out O --model M."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from pairembed.extract import ExtractorConfig, ModelLoadFailure, embed_pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pair-embed")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="embed every task's unit pair")
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True, help="encoder name or local path")
    p.add_argument("--pooling", choices=("aggregate-token", "mean-pool"),
                   default="aggregate-token")
    p.add_argument("--max-length", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = ExtractorConfig(
        model=args.model,
        pooling=args.pooling,
        max_length=args.max_length,
        batch_size=args.batch_size,
    )
    try:
        count = embed_pairs(args.tasks, args.out, config)
    except ModelLoadFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    print(f"wrote {count} vectors -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
