"""bert-export command line: corpus in, two HYCQE1 stores out."""

from __future__ import annotations

import argparse
import os
import sys

from .export import ExportError, ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bert-export",
        description="Export frozen-encoder token embeddings to HYCQE1 stores.",
    )
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--out-desc", required=True)
    parser.add_argument("--out-code", required=True)
    parser.add_argument("--model", required=True, help="pretrained model id or local path")
    parser.add_argument("--max-q", type=int, default=64)
    parser.add_argument("--max-a", type=int, default=256)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--layer", choices=["last", "0"], default="last",
                        help="'last' for contextual vectors, '0' for the static word-embedding lookup")
    parser.add_argument("--n", type=int, default=None,
                        help="assert the model hidden size equals this value")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not os.path.isfile(args.corpus):
        print(f"error: corpus path does not exist: {args.corpus}", file=sys.stderr)
        return 2
    job = ExportJob(
        corpus=args.corpus,
        out_desc=args.out_desc,
        out_code=args.out_code,
        model_id=args.model,
        max_q=args.max_q,
        max_a=args.max_a,
        device=args.device,
        layer=args.layer,
        expected_n=args.n,
    )
    try:
        summary = export_embeddings(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {summary['items']} items at n={summary['n']} -> {args.out_desc}, {args.out_code}")
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
