"""Command line: serve a checkpoint, or fine-tune one from data files."""

from __future__ import annotations

import argparse
import logging
import sys

from .data import (
    build_marker_dataset,
    build_training_pairs,
    load_hint_cache,
    load_judgments,
    load_products,
    load_queries,
)
from .model import ModelConfig
from .service import ServiceConfig, serve
from .training import TrainConfig, finetune


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="scorer-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a checkpoint over the wire protocol")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--max-batch-size", type=int, default=256)
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("finetune", help="train a pair scorer from judgment files")
    p.add_argument("--judgments", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--hints", help="hint cache file; enables hinted input mode")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("finetune-synthetic", help="train on the marker-token dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args()
    if args.command == "serve":
        serve(
            ServiceConfig(
                model_path=args.checkpoint,
                max_batch_size=args.max_batch_size,
                device=args.device,
                port=args.port,
            )
        )
        return

    if args.command == "finetune":
        hints = load_hint_cache(args.hints) if args.hints else None
        pairs = build_training_pairs(
            load_judgments(args.judgments),
            load_products(args.products),
            load_queries(args.queries),
            hints,
        )
    else:
        pairs = build_marker_dataset(n_pairs=args.pairs, seed=args.seed)

    _, auc = finetune(
        pairs,
        ModelConfig(seed=args.seed),
        TrainConfig(epochs=args.epochs, seed=args.seed),
        checkpoint_path=args.out,
    )
    print(f"trained on {len(pairs)} pairs, best validation AUC {auc:.4f} -> {args.out}")


if __name__ == "__main__":
    sys.exit(main())
