"""Command line: `chanformer train ...` and `chanformer predict ...`."""

from __future__ import annotations

import argparse
import json
import sys

from .predict import predict_file
from .train import TrainSettings, train_file


def build_parser():
    parser = argparse.ArgumentParser(prog="chanformer")
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="fit the refinement network on a dataset file")
    t.add_argument("--data", required=True)
    t.add_argument("--checkpoint", required=True)
    t.add_argument("--epochs", type=int, default=400)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--loss", choices=("bce", "mse", "kl"), default="bce")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--patience", type=int, default=60)
    p = sub.add_parser("predict", help="write tile-map predictions for a dataset file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        settings = TrainSettings(epochs=args.epochs, batch_size=args.batch_size,
                                 loss=args.loss, seed=args.seed, patience=args.patience)
        meta = train_file(args.data, args.checkpoint, settings)
        print(json.dumps(meta))
    elif args.command == "predict":
        count = predict_file(args.checkpoint, args.data, args.out)
        print(json.dumps({"predicted": count}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
