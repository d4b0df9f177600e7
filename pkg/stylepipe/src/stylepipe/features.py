"""Frozen convolutional feature extractors for the style losses."""

from __future__ import annotations

import torch
from torch import nn

# Activations after each conv block's last ReLU in VGG16.
VGG16_TAPS = {
    "relu1_2": 3,
    "relu2_2": 8,
    "relu3_3": 15,
    "relu4_3": 22,
    "relu5_3": 29,
}

WEIGHTS_HINT = (
    "pretrained weights unavailable; pass weights='random' for a fixed "
    "random-initialized extractor, or pre-populate the torchvision cache"
)


def _freeze(module: nn.Module) -> nn.Module:
    for p in module.parameters():
        p.requires_grad_(False)
    return module.eval()


class TappedFeatures(nn.Module):
    """Runs a sequential trunk and returns activations at tapped indices."""

    def __init__(self, trunk: nn.Sequential, taps: dict[str, int]):
        super().__init__()
        last = max(taps.values())
        self.trunk = nn.Sequential(*list(trunk.children())[: last + 1])
        self.taps = dict(taps)
        _freeze(self)

    def forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        index_to_name = {i: n for n, i in self.taps.items()}
        out: dict[str, torch.Tensor] = {}
        for i, layer in enumerate(self.trunk):
            x = layer(x)
            if i in index_to_name:
                out[index_to_name[i]] = x
        return out

    @property
    def layer_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.taps, key=self.taps.get))


def build_feature_extractor(weights: str = "pretrained", seed: int = 0) -> TappedFeatures:
    """VGG16 tapped at its five block outputs.

    ``weights='pretrained'`` loads the torchvision checkpoint and raises a
    RuntimeError with a remediation hint when it cannot be fetched;
    ``weights='random'`` uses a fixed-seed random initialization (useful
    offline; random Gram features still carry texture statistics).
    """
    from torchvision import models

    if weights == "pretrained":
        try:
            vgg = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise RuntimeError(WEIGHTS_HINT) from exc
    elif weights == "random":
        torch.manual_seed(seed)
        vgg = models.vgg16(weights=None)
    else:
        raise ValueError(f"unknown weights mode: {weights}")
    return TappedFeatures(vgg.features, VGG16_TAPS)


class TinyExtractor(nn.Module):
    """Small smooth extractor for numeric tests.

    Two tanh conv layers (tanh keeps finite-difference gradient checks
    well-posed), both tapped, fixed seed, frozen.
    """

    def __init__(self, in_channels: int = 2, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.conv1 = nn.Conv2d(in_channels, 4, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(4, 8, kernel_size=3, padding=1)
        _freeze(self)

    def forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        a = torch.tanh(self.conv1(x))
        b = torch.tanh(self.conv2(a))
        return {"tap1": a, "tap2": b}

    @property
    def layer_names(self) -> tuple[str, ...]:
        return ("tap1", "tap2")
