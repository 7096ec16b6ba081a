"""Dataset manifest and evaluation report JSON.

A manifest lists the class count, the backbone ids, and per image: an id,
one mask path, the foreground classes present, and one feature-volume path
per backbone. Paths are stored relative to the manifest file's directory so
a dataset directory can be moved wholesale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError
from .fvolio import read_fvol, read_mask
from .tensor import IGNORE_LABEL

MANIFEST_SCHEMA = "protoens-manifest-v1"
REPORT_SCHEMA = "protoens-report-v1"


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    mask_path: str
    classes: tuple[int, ...]
    fvol_paths: dict[str, str]  # backbone id -> relative path


@dataclass(frozen=True)
class Manifest:
    class_count: int
    backbones: tuple[str, ...]
    images: tuple[ImageEntry, ...]
    base_dir: Path = field(default_factory=Path)

    def entry(self, image_id: str) -> ImageEntry:
        for e in self.images:
            if e.image_id == image_id:
                return e
        raise KeyError(f"no image {image_id!r} in manifest")

    def images_with_class(self, class_id: int) -> list[ImageEntry]:
        return [e for e in self.images if class_id in e.classes]

    def resolve(self, relpath: str) -> Path:
        return self.base_dir / relpath


def _entry_to_json(e: ImageEntry) -> dict:
    return {
        "id": e.image_id,
        "mask": e.mask_path,
        "classes": list(e.classes),
        "fvols": dict(sorted(e.fvol_paths.items())),
    }


def save_manifest(manifest: Manifest, path) -> None:
    doc = {
        "schema": MANIFEST_SCHEMA,
        "class_count": manifest.class_count,
        "backbones": list(manifest.backbones),
        "images": [_entry_to_json(e) for e in manifest.images],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise ManifestError(f"{path}: schema is {doc.get('schema')!r}, expected {MANIFEST_SCHEMA!r}")
    try:
        images = tuple(
            ImageEntry(
                image_id=str(item["id"]),
                mask_path=str(item["mask"]),
                classes=tuple(int(c) for c in item["classes"]),
                fvol_paths={str(k): str(v) for k, v in item["fvols"].items()},
            )
            for item in doc["images"]
        )
        manifest = Manifest(
            class_count=int(doc["class_count"]),
            backbones=tuple(str(b) for b in doc["backbones"]),
            images=images,
            base_dir=path.parent,
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: malformed manifest: {exc!r}") from exc
    return manifest


def validate_manifest(manifest: Manifest) -> None:
    """Full validation pass: a manifest that passes never produces a
    file-level error later during evaluation.

    Checks existence and format of every mask and feature volume, label
    ranges against class_count, agreement between declared and actual
    classes, and per-backbone channel consistency.
    """
    if manifest.class_count < 1:
        raise ManifestError(f"class_count must be >= 1, got {manifest.class_count}")
    if not manifest.backbones:
        raise ManifestError("manifest lists no backbones")
    if len(set(manifest.backbones)) != len(manifest.backbones):
        raise ManifestError(f"duplicate backbone ids: {manifest.backbones}")
    if not manifest.images:
        raise ManifestError("manifest lists no images")
    ids = [e.image_id for e in manifest.images]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate image ids in manifest")

    channels: dict[str, int] = {}
    for e in manifest.images:
        mask_path = manifest.resolve(e.mask_path)
        if not mask_path.is_file():
            raise ManifestError(f"image {e.image_id!r}: mask file missing: {mask_path}")
        mask = read_mask(mask_path)
        present = set(mask.present_classes())
        bad = [c for c in present if c > manifest.class_count]
        if bad:
            raise ManifestError(
                f"image {e.image_id!r}: mask labels {sorted(bad)} exceed class_count "
                f"{manifest.class_count}")
        declared = set(e.classes)
        if not declared:
            raise ManifestError(f"image {e.image_id!r}: no classes declared")
        if any(c < 1 or c >= IGNORE_LABEL or c > manifest.class_count for c in declared):
            raise ManifestError(
                f"image {e.image_id!r}: declared classes {sorted(declared)} out of range")
        if declared != present:
            raise ManifestError(
                f"image {e.image_id!r}: declared classes {sorted(declared)} but mask "
                f"contains {sorted(present)}")
        missing = [b for b in manifest.backbones if b not in e.fvol_paths]
        if missing:
            raise ManifestError(f"image {e.image_id!r}: no feature volume for backbones {missing}")
        for backbone in manifest.backbones:
            fvol_path = manifest.resolve(e.fvol_paths[backbone])
            if not fvol_path.is_file():
                raise ManifestError(
                    f"image {e.image_id!r}: feature volume missing: {fvol_path}")
            volume = read_fvol(fvol_path)
            prev = channels.setdefault(backbone, volume.channels)
            if volume.channels != prev:
                raise ManifestError(
                    f"image {e.image_id!r}: backbone {backbone!r} has {volume.channels} "
                    f"channels here but {prev} elsewhere")


def write_report(report: dict, path) -> None:
    """Serialize a report with a canonical key order; identical runs produce
    byte-identical files."""
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != REPORT_SCHEMA:
        raise ManifestError(f"{path}: schema is {doc.get('schema')!r}, expected {REPORT_SCHEMA!r}")
    return doc
