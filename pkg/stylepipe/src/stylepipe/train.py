"""Two-stage optimization and prediction export.

Stage one fits the residual extrapolator with the combined style and
masked-content objective; stage two freezes it and trains a classifier on
(optionally extrapolated) fragments with categorical cross-entropy.
Everything is seeded and single-process so runs are reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F
from torch.utils.data import DataLoader

from .data import FragmentDataset
from .features import build_feature_extractor
from .losses import LossConfig, cross_entropy, style_extrapolation_loss
from .models import (
    build_classifier,
    build_cnn_baseline,
    build_extrapolator,
)


@dataclass(frozen=True)
class TrainConfig:
    """Resolved knobs of one training run; serialized next to checkpoints."""

    image_size: int = 224
    batch_size: int = 8
    lr: float = 1e-3
    epochs_extrapolator: int = 1
    epochs_classifier: int = 2
    seed: int = 0
    weights: str = "pretrained"
    loss: LossConfig = field(default_factory=LossConfig)

    def to_json(self) -> dict:
        return asdict(self)


def _loader(dataset, config: TrainConfig, shuffle: bool) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(config.seed)
    return DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=shuffle,
        num_workers=0,
        generator=generator,
    )


def _log_losses(path: Path, losses) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss"])
        for epoch, value in enumerate(losses, start=1):
            writer.writerow([epoch, f"{value:.8f}"])


def train_extrapolator(manifest_path, run_dir, config: TrainConfig,
                       epochs: int | None = None):
    """Fit the extrapolator on the train split; returns (model, losses).

    The per-epoch mean objective is logged to extrapolator_loss.csv and
    the final weights to extrapolator.pt under ``run_dir``.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    dataset = FragmentDataset(manifest_path, "train", image_size=config.image_size)
    loader = _loader(dataset, config, shuffle=True)

    model = build_extrapolator(weights=config.weights, seed=config.seed)
    extractor = build_feature_extractor(weights=config.weights, seed=config.seed)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.lr)

    losses = []
    model.train()
    for _ in range(epochs if epochs is not None else config.epochs_extrapolator):
        total, batches = 0.0, 0
        for images, masks, _, _ in loader:
            optimizer.zero_grad()
            out = model(images)
            loss = style_extrapolation_loss(images, out, masks, extractor, config.loss)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1
        losses.append(total / max(batches, 1))

    _log_losses(run_dir / "extrapolator_loss.csv", losses)
    torch.save(model.state_dict(), run_dir / "extrapolator.pt")
    return model, losses


def _build_model(kind: str, k: int, config: TrainConfig) -> nn.Module:
    if kind == "classifier":
        return build_classifier(k, weights=config.weights, seed=config.seed)
    if kind == "cnn":
        return build_cnn_baseline(k, image_size=config.image_size, seed=config.seed)
    raise ValueError(f"unknown model kind: {kind}")


def _recalibrate_batch_norms(model: nn.Module, loader, extrapolator=None) -> None:
    """Re-estimate batch-norm statistics under the final weights.

    Short training runs leave running statistics trailing the weights,
    which makes eval-mode behavior diverge from what was optimized. One
    forward-only cumulative pass over the training data fixes that.
    Frozen stages (used as-is) are left untouched.
    """
    if hasattr(model, "recalibratable_norms"):
        norms = list(model.recalibratable_norms())
    else:
        norms = [m for m in model.modules() if isinstance(m, nn.BatchNorm2d)]
    if not norms:
        return
    for norm in norms:
        norm.reset_running_stats()
        norm.momentum = None  # cumulative average
    model.train()
    with torch.no_grad():
        for images, _, _, _ in loader:
            if extrapolator is not None:
                images = extrapolator(images)
            model(images)
    model.eval()


def train_classifier(manifest_path, run_dir, config: TrainConfig,
                     extrapolator: nn.Module | None = None,
                     kind: str = "classifier"):
    """Train a classifier on the train split; returns (model, losses).

    When an extrapolator is given it is frozen and applied to every batch
    before the classifier, during training and prediction alike. After
    the optimization epochs the model's batch-norm statistics are
    re-estimated with a forward-only pass.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    dataset = FragmentDataset(manifest_path, "train", image_size=config.image_size)
    loader = _loader(dataset, config, shuffle=True)
    k = dataset.k

    model = _build_model(kind, k, config)
    if extrapolator is not None:
        extrapolator.eval()
        for p in extrapolator.parameters():
            p.requires_grad_(False)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.lr)

    losses = []
    model.train()
    for _ in range(config.epochs_classifier):
        total, batches = 0.0, 0
        for images, _, labels, _ in loader:
            optimizer.zero_grad()
            if extrapolator is not None:
                with torch.no_grad():
                    images = extrapolator(images)
            probabilities = torch.softmax(model(images), dim=-1)
            one_hot = F.one_hot(labels, num_classes=k).to(probabilities.dtype)
            loss = cross_entropy(one_hot, probabilities)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1
        losses.append(total / max(batches, 1))

    calibration_loader = DataLoader(
        dataset, batch_size=config.batch_size, shuffle=False, num_workers=0
    )
    _recalibrate_batch_norms(model, calibration_loader, extrapolator)

    _log_losses(run_dir / "classifier_loss.csv", losses)
    torch.save(model.state_dict(), run_dir / "classifier.pt")
    return model, losses


def predict_to_csv(manifest_path, split: str, model: nn.Module, out_csv,
                   extrapolator: nn.Module | None = None,
                   image_size: int = 224, batch_size: int = 16) -> Path:
    """Write predictions for one split, sorted by fragment_id.

    Columns: fragment_id, predicted_k, then p_1..p_K probabilities.
    """
    dataset = FragmentDataset(manifest_path, split, image_size=image_size)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    k = dataset.k

    model.eval()
    if extrapolator is not None:
        extrapolator.eval()
    rows = []
    with torch.no_grad():
        for images, _, _, fragment_ids in loader:
            if extrapolator is not None:
                images = extrapolator(images)
            probabilities = torch.softmax(model(images), dim=-1)
            predicted = probabilities.argmax(dim=-1) + 1
            for i, fid in enumerate(fragment_ids):
                rows.append((fid, int(predicted[i]), [float(p) for p in probabilities[i]]))

    rows.sort(key=lambda r: r[0])
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fragment_id", "predicted_k"] + [f"p_{i + 1}" for i in range(k)])
        for fid, pred, probs in rows:
            writer.writerow([fid, pred] + [f"{p:.6f}" for p in probs])
    return out_csv


def save_run_config(run_dir, config: TrainConfig, model_kind: str, k: int) -> None:
    payload = {"model": model_kind, "k": k, **config.to_json()}
    Path(run_dir, "config.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_run(run_dir):
    """Rebuild the models of a finished run from its config and weights."""
    run_dir = Path(run_dir)
    payload = json.loads((run_dir / "config.json").read_text())
    model_kind = payload.pop("model")
    k = payload.pop("k")
    loss = LossConfig(**payload.pop("loss"))
    config = TrainConfig(loss=loss, **payload)

    extrapolator = None
    if (run_dir / "extrapolator.pt").is_file():
        extrapolator = build_extrapolator(weights="random", seed=config.seed)
        extrapolator.load_state_dict(torch.load(run_dir / "extrapolator.pt", weights_only=True))
        extrapolator.eval()
    kind = "classifier" if model_kind in ("proposed", "tl") else "cnn"
    model = _build_model(kind, k, config)
    model.load_state_dict(torch.load(run_dir / "classifier.pt", weights_only=True))
    model.eval()
    if model_kind != "proposed":
        extrapolator = None
    return model, extrapolator, config
