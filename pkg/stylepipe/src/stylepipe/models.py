"""Model builders: residual extrapolator, classifier, and CNN baseline."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .features import WEIGHTS_HINT


def _load_backbone(factory, weights_enum, weights: str, seed: int):
    if weights == "pretrained":
        try:
            return factory(weights=weights_enum)
        except Exception as exc:
            raise RuntimeError(WEIGHTS_HINT) from exc
    if weights == "random":
        torch.manual_seed(seed)
        return factory(weights=None)
    raise ValueError(f"unknown weights mode: {weights}")


class ResidualExtrapolator(nn.Module):
    """Autoencoder with a residual skip: output = input + decoder(encoder(input)).

    The encoder is a ResNet18 trunk (1/32 spatial, 512 channels); the
    decoder upsamples back with plain conv stages so that zeroing its
    parameters makes the module an exact identity.
    """

    def __init__(self, weights: str = "pretrained", seed: int = 0, train_encoder: bool = False):
        super().__init__()
        from torchvision import models

        resnet = _load_backbone(
            models.resnet18,
            getattr(models, "ResNet18_Weights", None) and models.ResNet18_Weights.IMAGENET1K_V1,
            weights,
            seed,
        )
        self.encoder = nn.Sequential(
            resnet.conv1, resnet.bn1, resnet.relu, resnet.maxpool,
            resnet.layer1, resnet.layer2, resnet.layer3, resnet.layer4,
        )
        self.train_encoder = train_encoder
        if not train_encoder:
            for p in self.encoder.parameters():
                p.requires_grad_(False)

        stages = []
        channels = [512, 256, 128, 64, 32, 16]
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            stages += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c_in, c_out, kernel_size=3, padding=1),
                nn.ReLU(inplace=True),
            ]
        stages.append(nn.Conv2d(channels[-1], 3, kernel_size=3, padding=1))
        self.decoder = nn.Sequential(*stages)

    def train(self, mode: bool = True):
        # A frozen encoder stays in eval so its normalization statistics
        # neither drift during training nor differ at inference time.
        super().train(mode)
        if not self.train_encoder:
            self.encoder.eval()
        return self

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        residual = self.decoder(self.encoder(x))
        if residual.shape[-2:] != x.shape[-2:]:
            residual = F.interpolate(residual, size=x.shape[-2:], mode="bilinear", align_corners=False)
        return x + residual


def build_extrapolator(weights: str = "pretrained", seed: int = 0,
                       train_encoder: bool = False) -> ResidualExtrapolator:
    return ResidualExtrapolator(weights=weights, seed=seed, train_encoder=train_encoder)


def zero_decoder(model: ResidualExtrapolator) -> ResidualExtrapolator:
    """Zero every decoder parameter, making the module the identity map."""
    with torch.no_grad():
        for p in model.decoder.parameters():
            p.zero_()
    return model


class StyleClassifier(nn.Module):
    """EfficientNet-B0 with its early stages frozen and a K-way head."""

    def __init__(self, k: int, weights: str = "pretrained", freeze_depth: int = 2, seed: int = 0):
        super().__init__()
        if k < 2:
            raise ValueError("need at least two classes")
        from torchvision import models

        backbone = _load_backbone(
            models.efficientnet_b0,
            getattr(models, "EfficientNet_B0_Weights", None)
            and models.EfficientNet_B0_Weights.IMAGENET1K_V1,
            weights,
            seed,
        )
        for stage in backbone.features[:freeze_depth]:
            for p in stage.parameters():
                p.requires_grad_(False)
        in_features = backbone.classifier[1].in_features
        backbone.classifier[1] = nn.Linear(in_features, k)
        self.backbone = backbone
        self.k = k
        self.freeze_depth = freeze_depth

    def train(self, mode: bool = True):
        # Frozen stages are used "as-is": eval mode keeps their
        # normalization statistics untouched while the rest fine-tunes.
        super().train(mode)
        for stage in self.backbone.features[: self.freeze_depth]:
            stage.eval()
        return self

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x)

    def probabilities(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=-1)

    def frozen_parameters(self):
        for stage in self.backbone.features[: self.freeze_depth]:
            yield from stage.parameters()

    def recalibratable_norms(self):
        """Batch-norm layers outside the frozen stages."""
        frozen = set()
        for stage in self.backbone.features[: self.freeze_depth]:
            frozen.update(id(m) for m in stage.modules())
        for module in self.backbone.modules():
            if isinstance(module, nn.BatchNorm2d) and id(module) not in frozen:
                yield module


class CnnBaseline(nn.Module):
    """Two conv+ReLU+maxpool blocks feeding one linear layer."""

    def __init__(self, k: int, image_size: int = 224, seed: int = 0):
        super().__init__()
        if k < 2:
            raise ValueError("need at least two classes")
        torch.manual_seed(seed)
        self.block1 = nn.Sequential(nn.Conv2d(3, 8, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool2d(4))
        self.block2 = nn.Sequential(nn.Conv2d(8, 16, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool2d(4))
        side = image_size // 16
        self.head = nn.Linear(16 * side * side, k)
        self.k = k

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.block2(self.block1(x))
        return self.head(x.flatten(1))

    def probabilities(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=-1)


def build_classifier(k: int, weights: str = "pretrained", freeze_depth: int = 2,
                     seed: int = 0) -> StyleClassifier:
    return StyleClassifier(k=k, weights=weights, freeze_depth=freeze_depth, seed=seed)


def build_cnn_baseline(k: int, image_size: int = 224, seed: int = 0) -> CnnBaseline:
    return CnnBaseline(k=k, image_size=image_size, seed=seed)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def parameter_snapshot(model: nn.Module) -> list[torch.Tensor]:
    return [p.detach().clone() for p in model.parameters()]


def parameters_equal(snapshot, model: nn.Module) -> bool:
    current = list(model.parameters())
    if len(snapshot) != len(current):
        return False
    return all(torch.equal(a, b.detach()) for a, b in zip(snapshot, current))
