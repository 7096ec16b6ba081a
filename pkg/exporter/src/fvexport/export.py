"""Batch export of backbone feature volumes for a mask-annotated image set.

Input layout: an images directory (png/jpg) and a masks directory holding
one 8-bit grayscale PNG per image stem (pixel value = class id, 255 =
ignore). Output: one FVL1 file per (image, backbone), one resized mask PNG
per image, and a manifest.json, all under the output directory.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import ExportConfigError, build_extractor, extract
from .writers import write_fvol, write_manifest, write_mask

IGNORE_LABEL = 255
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

# ImageNet normalization
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class ExportDataError(ValueError):
    """Missing or malformed dataset files."""


@dataclass(frozen=True)
class ExportConfig:
    images_dir: Path
    masks_dir: Path
    out_dir: Path
    backbones: tuple[str, ...] = ("vgg16", "resnet50", "mobilenetv3")
    tap_layers: dict = field(default_factory=dict)  # backbone -> layer override
    input_size: int = 417
    class_count: int = 20
    pretrained: bool = True

    def __post_init__(self):
        object.__setattr__(self, "images_dir", Path(self.images_dir))
        object.__setattr__(self, "masks_dir", Path(self.masks_dir))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "backbones", tuple(self.backbones))
        if not self.backbones:
            raise ExportConfigError("at least one backbone is required")
        if len(set(self.backbones)) != len(self.backbones):
            raise ExportConfigError(f"duplicate backbones: {self.backbones}")
        if self.input_size < 32:
            raise ExportConfigError(f"input_size must be >= 32, got {self.input_size}")
        if self.class_count < 1:
            raise ExportConfigError(f"class_count must be >= 1, got {self.class_count}")
        unknown_taps = set(self.tap_layers) - set(self.backbones)
        if unknown_taps:
            raise ExportConfigError(f"tap overrides for unlisted backbones: {sorted(unknown_taps)}")


def _preprocess(image_path: Path, size: int) -> torch.Tensor:
    with Image.open(image_path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    return torch.from_numpy(arr.transpose(2, 0, 1)).unsqueeze(0)


def _load_mask(mask_path: Path, size: int, class_count: int) -> np.ndarray:
    with Image.open(mask_path) as img:
        if img.mode != "L":
            raise ExportDataError(
                f"{mask_path}: mask must be an 8-bit grayscale PNG, got mode {img.mode!r}")
        resized = img.resize((size, size), Image.NEAREST)
        labels = np.asarray(resized, dtype=np.uint8)
    present = [int(v) for v in np.unique(labels) if v not in (0, IGNORE_LABEL)]
    bad = [c for c in present if c > class_count]
    if bad:
        raise ExportDataError(
            f"{mask_path}: labels {bad} exceed class_count {class_count}")
    return labels


def _pair_inputs(cfg: ExportConfig) -> list[tuple[str, Path, Path]]:
    if not cfg.images_dir.is_dir():
        raise ExportDataError(f"images directory not found: {cfg.images_dir}")
    if not cfg.masks_dir.is_dir():
        raise ExportDataError(f"masks directory not found: {cfg.masks_dir}")
    pairs = []
    for image_path in sorted(cfg.images_dir.iterdir()):
        if image_path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        mask_path = cfg.masks_dir / f"{image_path.stem}.png"
        if not mask_path.is_file():
            raise ExportDataError(f"no mask for image {image_path.name}: {mask_path}")
        pairs.append((image_path.stem, image_path, mask_path))
    if not pairs:
        raise ExportDataError(f"no images found under {cfg.images_dir}")
    return pairs


def export(cfg: ExportConfig) -> Path:
    """Run the export; returns the manifest path.

    All backbones are constructed (and weights loaded) before any file is
    written, so configuration problems never leave a partial dataset.
    """
    extractors = {
        name: build_extractor(name, cfg.tap_layers.get(name), cfg.pretrained)
        for name in cfg.backbones
    }
    pairs = _pair_inputs(cfg)

    (cfg.out_dir / "masks").mkdir(parents=True, exist_ok=True)
    for name in cfg.backbones:
        (cfg.out_dir / "fvols" / name).mkdir(parents=True, exist_ok=True)

    entries = []
    for image_id, image_path, mask_path in pairs:
        labels = _load_mask(mask_path, cfg.input_size, cfg.class_count)
        classes = [int(v) for v in np.unique(labels) if v not in (0, IGNORE_LABEL)]
        if not classes:
            print(f"warning: skipping {image_id}: no foreground labels after resize",
                  file=sys.stderr)
            continue
        batch = _preprocess(image_path, cfg.input_size)
        mask_rel = f"masks/{image_id}.png"
        write_mask(labels, cfg.out_dir / mask_rel)
        fvols = {}
        for name in cfg.backbones:
            feat = extract(extractors[name], batch)  # (C, h, w)
            volume = feat.permute(1, 2, 0).contiguous().numpy().astype(np.float32)
            rel = f"fvols/{name}/{image_id}.fvl"
            write_fvol(volume, cfg.out_dir / rel)
            fvols[name] = rel
        entries.append({"id": image_id, "mask": mask_rel, "classes": classes, "fvols": fvols})

    if not entries:
        raise ExportDataError("every input image was skipped; nothing to export")
    manifest_path = cfg.out_dir / "manifest.json"
    write_manifest(cfg.class_count, cfg.backbones, entries, manifest_path)
    return manifest_path
