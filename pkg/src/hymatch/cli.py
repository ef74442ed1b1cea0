"""Command-line entry point.

Subcommands: ingest, make-triples, train, eval, search, export-viz.
Exit codes: 0 success, 1 runtime failure, 2 usage or validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data, evaluation, model, training, viz
from .errors import DivergenceError, FormatError


class UsageError(Exception):
    """Bad flags, missing paths, or inconsistent inputs (exit code 2)."""


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"input path does not exist: {path}")
    return path


def _positive(value: float, name: str) -> None:
    if value <= 0:
        raise UsageError(f"--{name} must be positive, got {value}")


def _load_stores(args):
    desc = data.read_embeddings(_require_file(args.desc_store))
    code = data.read_embeddings(_require_file(args.code_store))
    if desc.n != code.n:
        raise UsageError(
            f"embedding dim mismatch: descriptions n={desc.n}, codes n={code.n}"
        )
    return desc, code


def _load_checkpoint_for(args, n: int) -> model.ModelParams:
    params = model.load_checkpoint(_require_file(args.checkpoint))
    if params.n != n:
        raise UsageError(
            f"dimension mismatch: checkpoint expects n={params.n}, stores have n={n}"
        )
    return params


def _model_cfg(args, n: int, d: int) -> model.ModelConfig:
    return model.ModelConfig(
        n=n,
        d=d,
        max_q_len=args.max_q_len,
        max_a_len=args.max_a_len,
        eps_ball=args.eps_ball,
    )


def cmd_ingest(args) -> int:
    _positive(args.n, "n")
    items = data.load_corpus(_require_file(args.corpus))
    desc, code = data.embed_corpus(items, args.n, args.seed)
    data.write_embeddings(desc, args.out_desc)
    data.write_embeddings(code, args.out_code)
    print(f"ingested {len(items)} items (n={args.n}) -> {args.out_desc}, {args.out_code}")
    return 0


def cmd_make_triples(args) -> int:
    items = data.load_corpus(_require_file(args.corpus))
    try:
        ratios = tuple(float(r) for r in args.splits.split(","))
        datasets = data.make_triples(items, ratios, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    counts = []
    for split, dataset in datasets.items():
        if len(dataset) == 0:
            counts.append(f"{split}=0")
            continue
        path = os.path.join(args.out_dir, f"triples-{split}.jsonl")
        data.write_triples(dataset, path)
        counts.append(f"{split}={len(dataset)}")
    print(" ".join(counts))
    return 0


def cmd_train(args) -> int:
    desc, code = _load_stores(args)
    triples = data.read_triples(_require_file(args.triples), split="train")
    _positive(args.d, "d")
    _positive(args.margin, "margin")
    _positive(args.lr, "lr")
    if args.epochs < 0:
        raise UsageError(f"--epochs must be >= 0, got {args.epochs}")
    _positive(args.batch, "batch")
    cfg = _model_cfg(args, desc.n, args.d)
    tcfg = training.TrainConfig(
        margin=args.margin,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        eps_ball=args.eps_ball,
    )
    try:
        result = training.train(triples, desc, code, cfg, tcfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model.save_checkpoint(result.params, args.out_checkpoint)
    if args.out_loss_csv:
        training.write_loss_trace(result.epoch_losses, args.out_loss_csv)
    final = f"{result.epoch_losses[-1]:.6f}" if result.epoch_losses else "n/a"
    print(f"trained {args.epochs} epochs on {len(triples)} triples, final mean loss {final}")
    return 0


def cmd_eval(args) -> int:
    desc, code = _load_stores(args)
    params = _load_checkpoint_for(args, desc.n)
    triples = data.read_triples(_require_file(args.triples), split="test")
    cfg = _model_cfg(args, desc.n, params.d)
    try:
        report = evaluation.evaluate(params, triples, desc, code, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(evaluation.report_json(report))
    if args.table:
        print(evaluation.report_table(report))
    return 0


def cmd_search(args) -> int:
    desc, code = _load_stores(args)
    params = _load_checkpoint_for(args, desc.n)
    cfg = _model_cfg(args, desc.n, params.d)
    if args.query_id is not None:
        if args.query_id not in desc:
            raise UsageError(f"unknown query id: {args.query_id}")
        matrix = desc[args.query_id]
    else:
        try:
            matrix = data.pseudo_embed(args.query_text, desc.n, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    _positive(args.topk, "topk")
    seq = model.build_sequence(matrix, model.ROLE_QUESTION, cfg)
    yq = model.pool_and_normalize(params, seq)
    ids = list(code.entries)
    scores = np.array(
        [
            model.score(
                params,
                yq,
                model.pool_and_normalize(params, model.build_sequence(code[cid], model.ROLE_ANSWER, cfg)),
            )
            for cid in ids
        ]
    )
    order = np.argsort(scores, kind="stable")[: min(args.topk, len(ids))]
    for idx in order:
        print(f"{ids[idx]}\t{float(scores[idx])!r}")
    return 0


def cmd_export_viz(args) -> int:
    desc, code = _load_stores(args)
    params = _load_checkpoint_for(args, desc.n)
    triples = data.read_triples(_require_file(args.triples), split="test")
    cfg = _model_cfg(args, desc.n, params.d)
    try:
        features = viz.extract_pair_features(params, triples, desc, code, cfg)
        points = viz.pca_2d(viz.feature_matrix(features))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    viz.export_points_csv(features, points, args.out_csv)
    if args.out_features_csv:
        viz.export_features_csv(features, args.out_features_csv)
    print(f"exported {len(features)} pair features -> {args.out_csv}")
    return 0


def _add_store_flags(p):
    p.add_argument("--desc-store", required=True)
    p.add_argument("--code-store", required=True)


def _add_seq_flags(p):
    p.add_argument("--max-q-len", type=int, default=64)
    p.add_argument("--max-a-len", type=int, default=256)
    p.add_argument("--eps-ball", type=float, default=1e-5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hymatch",
        description="Hyperbolic description-code matching: train, evaluate, search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="pseudo-embed a corpus into description/code stores")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-desc", required=True)
    p.add_argument("--out-code", required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("make-triples", help="split a corpus and sample negatives")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--splits", default="0.8,0.1,0.1", help="train,valid,test ratios")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_triples)

    p = sub.add_parser("train", help="train on a triples file")
    p.add_argument("--triples", required=True)
    _add_store_flags(p)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-loss-csv", default=None)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    _add_seq_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="rank every split description against split codes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--triples", required=True)
    _add_store_flags(p)
    p.add_argument("--table", action="store_true", help="also print an aligned table")
    _add_seq_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("search", help="rank all codes for a query")
    p.add_argument("--checkpoint", required=True)
    _add_store_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query-text")
    group.add_argument("--query-id")
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="must match the ingest seed for --query-text")
    _add_seq_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export-viz", help="export pair features and their 2-D projection")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--triples", required=True)
    _add_store_flags(p)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-features-csv", default=None)
    _add_seq_flags(p)
    p.set_defaults(func=cmd_export_viz)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
