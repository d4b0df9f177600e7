"""Loss functions for style extrapolation and classification.

The style side compares Gram matrices of feature activations between an
image and its extrapolated version; the content side is a masked pixel
reconstruction term. Conventions:

- activations are (positions, channels) 2-D, (channels, h, w) 3-D, or
  (batch, channels, h, w) 4-D tensors;
- batched losses return the mean over the batch of per-sample sums, so a
  batch of one reproduces the scalar formulas exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Weights of the combined objective.

    ``style_weight`` scales the Gram-matrix term, ``content_weight`` the
    masked reconstruction term. ``layer_weights`` must sum to 1 over the
    extractor's tapped layers; None means uniform over however many
    layers the extractor provides.
    """

    style_weight: float = 1.0
    content_weight: float = 10.0
    layer_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.style_weight < 0 or self.content_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.layer_weights is not None:
            if len(self.layer_weights) == 0:
                raise ValueError("at least one style layer required")
            if any(w < 0 for w in self.layer_weights):
                raise ValueError("layer weights must be non-negative")
            if abs(sum(self.layer_weights) - 1.0) > 1e-9:
                raise ValueError("layer weights must sum to 1")


def _positions_by_channels(activation: torch.Tensor) -> torch.Tensor:
    if activation.dim() == 2:
        return activation
    if activation.dim() == 3:
        c = activation.shape[0]
        return activation.reshape(c, -1).transpose(0, 1)
    raise ValueError("activation must be 2-D (n, m) or 3-D (c, h, w)")


def gram_matrix(activation: torch.Tensor) -> torch.Tensor:
    """Channel-correlation matrix A^T A of an (n, m) activation.

    Spatial arrangement is discarded: any permutation of the n position
    rows leaves the result unchanged. 4-D inputs yield batched grams.
    """
    if activation.dim() == 4:
        b, c = activation.shape[:2]
        flat = activation.reshape(b, c, -1)
        return torch.bmm(flat, flat.transpose(1, 2))
    a = _positions_by_channels(activation)
    return a.transpose(0, 1) @ a


def _batch_sum(value: torch.Tensor) -> torch.Tensor:
    if value.dim() >= 4:
        return value.reshape(value.shape[0], -1).sum(dim=1).mean()
    return value.sum()


def content_loss(image_feat: torch.Tensor, target_feat: torch.Tensor) -> torch.Tensor:
    """Half squared Frobenius distance between two activations."""
    if image_feat.shape != target_feat.shape:
        raise ValueError("feature shapes differ")
    return 0.5 * _batch_sum((image_feat - target_feat) ** 2)


def gram_style_discrepancy(
    activations_a: dict[str, torch.Tensor],
    activations_b: dict[str, torch.Tensor],
    layer_weights,
) -> torch.Tensor:
    """Weighted Gram-matrix discrepancy over tapped layers.

    Each layer contributes w / (4 m^2 n^2) * ||Gram_a - Gram_b||_F^2 with
    m feature maps and n spatial positions.
    """
    if set(activations_a) != set(activations_b):
        raise ValueError("activation layer sets differ")
    layers = list(activations_a)
    if layer_weights is None:
        layer_weights = [1.0 / len(layers)] * len(layers)
    if len(layer_weights) != len(layers):
        raise ValueError("one weight per tapped layer required")
    total = None
    for weight, layer in zip(layer_weights, layers):
        fa, fb = activations_a[layer], activations_b[layer]
        if fa.shape != fb.shape:
            raise ValueError(f"activation shapes differ at {layer}")
        if fa.dim() == 4:
            b, m = fa.shape[:2]
            n = fa.shape[2] * fa.shape[3]
            diff = gram_matrix(fa) - gram_matrix(fb)
            term = weight / (4.0 * m * m * n * n) * (diff ** 2).reshape(b, -1).sum(dim=1).mean()
        else:
            a2 = _positions_by_channels(fa)
            n, m = a2.shape
            diff = gram_matrix(fa) - gram_matrix(fb)
            term = weight / (4.0 * m * m * n * n) * (diff ** 2).sum()
        total = term if total is None else total + term
    return total


def auto_style_loss(
    image: torch.Tensor,
    extrapolated: torch.Tensor,
    extractor,
    config: LossConfig = LossConfig(),
) -> torch.Tensor:
    """Gram discrepancy between an image and its extrapolated version."""
    if image.shape != extrapolated.shape:
        raise ValueError("image shapes differ")
    return gram_style_discrepancy(
        extractor(image), extractor(extrapolated), config.layer_weights
    )


def masked_content_loss(
    image: torch.Tensor, extrapolated: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Half squared norm of the masked pixel difference.

    ``mask`` is in [0, 1] (1 on fragment pixels) and broadcasts against
    the image, e.g. (b, 1, h, w) against (b, 3, h, w).
    """
    if image.shape != extrapolated.shape:
        raise ValueError("image shapes differ")
    masked = mask * (image - extrapolated)
    return 0.5 * _batch_sum(masked ** 2)


def style_extrapolation_loss(
    image: torch.Tensor,
    extrapolated: torch.Tensor,
    mask: torch.Tensor,
    extractor,
    config: LossConfig = LossConfig(),
) -> torch.Tensor:
    """Combined objective: style_weight * L_style + content_weight * L_masked."""
    total = None
    if config.style_weight > 0:
        total = config.style_weight * auto_style_loss(image, extrapolated, extractor, config)
    if config.content_weight > 0:
        term = config.content_weight * masked_content_loss(image, extrapolated, mask)
        total = term if total is None else total + term
    if total is None:
        # Keep the graph alive so callers can still backpropagate a zero.
        total = 0.0 * extrapolated.sum()
    return total


def cross_entropy(one_hot: torch.Tensor, probabilities: torch.Tensor) -> torch.Tensor:
    """Categorical cross-entropy -sum y_k log p_k with a 1e-12 log floor.

    Accepts single vectors or batches; batches return the mean.
    """
    if one_hot.shape != probabilities.shape:
        raise ValueError("label and probability shapes differ")
    sums = probabilities.sum(dim=-1)
    if (probabilities < 0).any() or (sums - 1.0).abs().max() > 1e-6:
        raise ValueError("probabilities not normalized")
    log_p = torch.log(probabilities.clamp(min=LOG_FLOOR))
    per_sample = -(one_hot * log_p).sum(dim=-1)
    return per_sample.mean()
