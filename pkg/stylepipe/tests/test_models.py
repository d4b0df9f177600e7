import pytest
import torch

from stylepipe.models import (
    build_classifier,
    build_cnn_baseline,
    build_extrapolator,
    count_parameters,
    parameter_snapshot,
    parameters_equal,
    zero_decoder,
)


def test_extrapolator_preserves_shape():
    model = build_extrapolator(weights="random", seed=0)
    x = torch.randn(2, 3, 224, 224)
    with torch.no_grad():
        y = model(x)
    assert y.shape == x.shape


def test_extrapolator_handles_non_multiple_of_32():
    model = build_extrapolator(weights="random", seed=0)
    x = torch.randn(1, 3, 100, 60)
    with torch.no_grad():
        y = model(x)
    assert y.shape == x.shape


def test_zeroed_decoder_is_exact_identity():
    model = zero_decoder(build_extrapolator(weights="random", seed=1))
    x = torch.randn(1, 3, 64, 96)
    with torch.no_grad():
        y = model(x)
    assert torch.equal(x, y)


def test_extrapolator_eval_deterministic():
    model = build_extrapolator(weights="random", seed=2).eval()
    x = torch.randn(1, 3, 64, 64)
    with torch.no_grad():
        a = model(x)
        b = model(x)
    assert torch.equal(a, b)


def test_extrapolator_encoder_frozen_by_default():
    model = build_extrapolator(weights="random", seed=0)
    assert all(not p.requires_grad for p in model.encoder.parameters())
    assert any(p.requires_grad for p in model.decoder.parameters())


def test_classifier_probabilities_normalized():
    model = build_classifier(4, weights="random", seed=0).eval()
    with torch.no_grad():
        probs = model.probabilities(torch.randn(3, 3, 128, 128))
    assert (probs >= 0).all()
    assert torch.allclose(probs.sum(dim=-1), torch.ones(3), atol=1e-6)


def test_classifier_frozen_layers_unchanged_by_training_step():
    torch.manual_seed(0)
    model = build_classifier(3, weights="random", seed=0)
    frozen_before = [p.detach().clone() for p in model.frozen_parameters()]
    optimizer = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=1e-2)
    x = torch.randn(4, 3, 128, 128)
    labels = torch.tensor([0, 1, 2, 0])
    loss = torch.nn.functional.cross_entropy(model(x), labels)
    loss.backward()
    optimizer.step()
    frozen_after = list(model.frozen_parameters())
    assert all(torch.equal(a, b.detach()) for a, b in zip(frozen_before, frozen_after))
    # and something else did move
    assert not parameters_equal(
        [p.detach().clone() * 0 for p in model.parameters()], model
    )


def test_baseline_structure_and_size():
    model = build_cnn_baseline(4, image_size=224, seed=0)
    convs = [m for m in model.modules() if isinstance(m, torch.nn.Conv2d)]
    pools = [m for m in model.modules() if isinstance(m, torch.nn.MaxPool2d)]
    relus = [m for m in model.modules() if isinstance(m, torch.nn.ReLU)]
    linears = [m for m in model.modules() if isinstance(m, torch.nn.Linear)]
    assert len(convs) == 2 and len(pools) == 2 and len(relus) == 2 and len(linears) == 1
    backbone = build_classifier(4, weights="random", seed=0)
    assert count_parameters(model) < 0.05 * count_parameters(backbone)


def test_baseline_probabilities_normalized():
    model = build_cnn_baseline(3, image_size=64, seed=1).eval()
    with torch.no_grad():
        probs = model.probabilities(torch.randn(2, 3, 64, 64))
    assert torch.allclose(probs.sum(dim=-1), torch.ones(2), atol=1e-6)


def test_pretrained_unavailable_raises_with_hint(monkeypatch):
    from torchvision import models as tv_models

    def boom(*args, **kwargs):
        raise OSError("no network")

    monkeypatch.setattr(tv_models, "resnet18", boom)
    with pytest.raises(RuntimeError, match="weights='random'"):
        build_extrapolator(weights="pretrained")
    monkeypatch.setattr(tv_models, "efficientnet_b0", boom)
    with pytest.raises(RuntimeError, match="weights='random'"):
        build_classifier(4, weights="pretrained")


def test_classifier_rejects_single_class():
    with pytest.raises(ValueError, match="two classes"):
        build_classifier(1, weights="random")


def test_parameter_snapshot_helpers():
    model = build_cnn_baseline(2, image_size=32, seed=0)
    snapshot = parameter_snapshot(model)
    assert parameters_equal(snapshot, model)
    with torch.no_grad():
        next(model.parameters()).add_(1.0)
    assert not parameters_equal(snapshot, model)
