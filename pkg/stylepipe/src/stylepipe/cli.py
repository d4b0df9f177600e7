"""Command line: train the two-stage pipeline or baselines, export predictions."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import FragmentDataset
from .losses import LossConfig
from .train import (
    TrainConfig,
    load_run,
    predict_to_csv,
    save_run_config,
    train_classifier,
    train_extrapolator,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylepipe",
        description="Style-extrapolation pipeline and baselines over fragment datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model; 'proposed' runs both stages")
    train.add_argument("--manifest", required=True)
    train.add_argument("--out", required=True, help="run directory")
    train.add_argument("--model", choices=["proposed", "tl", "cnn"], default="proposed")
    train.add_argument("--image-size", type=int, default=224)
    train.add_argument("--batch-size", type=int, default=8)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--epochs-extrapolator", type=int, default=1)
    train.add_argument("--epochs-classifier", type=int, default=2)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--weights", choices=["pretrained", "random"], default="pretrained")
    train.add_argument("--style-weight", type=float, default=1.0)
    train.add_argument("--content-weight", type=float, default=10.0)

    predict = sub.add_parser("predict", help="export predictions CSV from a finished run")
    predict.add_argument("--run", required=True)
    predict.add_argument("--manifest", required=True)
    predict.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    predict.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    config = TrainConfig(
        image_size=args.image_size,
        batch_size=args.batch_size,
        lr=args.lr,
        epochs_extrapolator=args.epochs_extrapolator,
        epochs_classifier=args.epochs_classifier,
        seed=args.seed,
        weights=args.weights,
        loss=LossConfig(style_weight=args.style_weight, content_weight=args.content_weight),
    )
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)

    extrapolator = None
    if args.model == "proposed":
        extrapolator, ext_losses = train_extrapolator(args.manifest, run_dir, config)
        print(f"extrapolator: {len(ext_losses)} epochs, final loss {ext_losses[-1]:.4f}")

    kind = "cnn" if args.model == "cnn" else "classifier"
    model, losses = train_classifier(
        args.manifest, run_dir, config, extrapolator=extrapolator, kind=kind
    )
    print(f"classifier ({args.model}): {len(losses)} epochs, final loss {losses[-1]:.4f}")

    k = FragmentDataset(args.manifest, "all", image_size=config.image_size).k
    save_run_config(run_dir, config, args.model, k)
    print(f"run: {run_dir}")
    return 0


def _cmd_predict(args) -> int:
    model, extrapolator, config = load_run(args.run)
    path = predict_to_csv(
        args.manifest,
        args.split,
        model,
        args.out,
        extrapolator=extrapolator,
        image_size=config.image_size,
    )
    print(f"predictions: {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"train": _cmd_train, "predict": _cmd_predict}
    try:
        return handlers[args.command](args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
