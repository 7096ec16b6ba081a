"""ImageNet backbone registry and feature-tap construction."""

from __future__ import annotations

import torch
from torchvision import models
from torchvision.models.feature_extraction import create_feature_extractor


class ExportConfigError(ValueError):
    """Bad exporter configuration: unknown backbone, missing tap layer, or
    unavailable weights. Raised before anything is written."""


# name -> (builder, pretrained weights, default tap = last pre-classifier
# convolutional stage)
REGISTRY = {
    "vgg16": (models.vgg16, models.VGG16_Weights.IMAGENET1K_V1, "features"),
    "resnet50": (models.resnet50, models.ResNet50_Weights.IMAGENET1K_V1, "layer4"),
    "mobilenetv3": (models.mobilenet_v3_large,
                    models.MobileNet_V3_Large_Weights.IMAGENET1K_V1, "features"),
}

_RANDOM_INIT_SEED = 0


def backbone_names() -> tuple[str, ...]:
    return tuple(REGISTRY)


def build_extractor(name: str, tap: str | None = None, pretrained: bool = True) -> torch.nn.Module:
    """Eval-mode module mapping a (1, 3, H, W) batch to the tap activation.

    pretrained=False builds deterministic seeded random weights, useful for
    pipeline tests when ImageNet weights are unavailable.
    """
    if name not in REGISTRY:
        raise ExportConfigError(f"unknown backbone {name!r}, expected one of {sorted(REGISTRY)}")
    builder, weights, default_tap = REGISTRY[name]
    tap = tap or default_tap
    if pretrained:
        try:
            model = builder(weights=weights)
        except Exception as exc:  # download or checksum failure
            raise ExportConfigError(
                f"backbone {name!r}: pretrained weights unavailable ({exc})") from exc
    else:
        torch.manual_seed(_RANDOM_INIT_SEED)
        model = builder(weights=None)
    model.eval()
    try:
        model.get_submodule(tap)
    except AttributeError as exc:
        raise ExportConfigError(f"backbone {name!r} has no layer {tap!r}") from exc
    extractor = create_feature_extractor(model, return_nodes={tap: "feat"})
    extractor.eval()
    return extractor


def extract(extractor: torch.nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """(1, 3, H, W) -> (C, h, w) activation of the tap layer."""
    with torch.no_grad():
        out = extractor(batch)["feat"]
    return out.squeeze(0)
