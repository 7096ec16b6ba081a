"""Writers for the FVL1 dataset layout.

This is the consumer-facing contract of the export: FVL1 binary feature
volumes, 8-bit grayscale PNG masks, and a protoens-manifest-v1 JSON index.
The formats are implemented here independently so the exporter stays a
standalone producer of the on-disk interface.

FVL1: magic "FVL1", u16 version=1, u32 height/width/channels, then
height*width*channels float32 little-endian values in row-major
(row, column, channel) order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

FVOL_MAGIC = b"FVL1"
FVOL_VERSION = 1
_HEADER = struct.Struct("<4sHIII")

MANIFEST_SCHEMA = "protoens-manifest-v1"


def write_fvol(data: np.ndarray, path) -> None:
    """Write an (H, W, C) float32 array as an FVL1 file."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"feature volume must be (H, W, C), got shape {arr.shape}")
    h, w, c = arr.shape
    Path(path).write_bytes(_HEADER.pack(FVOL_MAGIC, FVOL_VERSION, h, w, c) + arr.tobytes())


def write_mask(labels: np.ndarray, path) -> None:
    """Write an (H, W) uint8 label grid as a grayscale PNG."""
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def write_manifest(class_count: int, backbones, images, path) -> None:
    """Write the manifest index.

    `images` is a list of dicts with keys id, mask, classes, fvols; paths
    must already be relative to the manifest directory.
    """
    doc = {
        "schema": MANIFEST_SCHEMA,
        "class_count": int(class_count),
        "backbones": list(backbones),
        "images": [
            {
                "id": item["id"],
                "mask": item["mask"],
                "classes": sorted(int(c) for c in item["classes"]),
                "fvols": dict(sorted(item["fvols"].items())),
            }
            for item in images
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
