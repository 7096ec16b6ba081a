"""Binary feature-volume files and grayscale mask PNGs.

FVL1 layout, fixed little-endian regardless of platform:

    offset  size  field
    0       4     magic "FVL1"
    4       2     version, u16 (currently 1)
    6       4     height, u32
    10      4     width, u32
    14      4     channels, u32
    18      4*H*W*C  float32 payload, row-major (row, column, channel)

Masks are 8-bit single-channel grayscale PNGs whose pixel value is the
class id; 255 is the ignore label.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FvolFormatError, UnsupportedFormatError
from .tensor import DenseMask, FeatureVolume

FVOL_MAGIC = b"FVL1"
FVOL_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def write_fvol(volume: FeatureVolume, path) -> None:
    header = _HEADER.pack(FVOL_MAGIC, FVOL_VERSION, volume.height, volume.width, volume.channels)
    payload = np.ascontiguousarray(volume.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_fvol(path) -> FeatureVolume:
    """Parse an FVL1 file; format faults report the offending byte offset."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FvolFormatError(
            f"file is {len(raw)} bytes, shorter than the {_HEADER.size}-byte header",
            path=path, offset=len(raw))
    magic, version, height, width, channels = _HEADER.unpack_from(raw)
    if magic != FVOL_MAGIC:
        raise FvolFormatError(f"bad magic {magic!r}, expected {FVOL_MAGIC!r}", path=path, offset=0)
    if version != FVOL_VERSION:
        raise FvolFormatError(f"unsupported version {version}, expected {FVOL_VERSION}",
                              path=path, offset=4)
    for off, name, value in ((6, "height", height), (10, "width", width), (14, "channels", channels)):
        if value < 1:
            raise FvolFormatError(f"{name} must be >= 1, got {value}", path=path, offset=off)
    expected = 4 * height * width * channels
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise FvolFormatError(
            f"payload is {actual} bytes but the header promises {expected}",
            path=path, offset=_HEADER.size + min(actual, expected))
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return FeatureVolume(data.astype(np.float32).reshape(height, width, channels))


def write_mask(mask: DenseMask, path) -> None:
    Image.fromarray(np.asarray(mask.labels), mode="L").save(Path(path), format="PNG")


def read_mask(path) -> DenseMask:
    """Read a label mask; anything but 8-bit single-channel grayscale is rejected."""
    with Image.open(Path(path)) as img:
        if img.mode != "L":
            raise UnsupportedFormatError(
                f"{path}: mask must be an 8-bit single-channel grayscale PNG, "
                f"got image mode {img.mode!r}")
        labels = np.asarray(img, dtype=np.uint8)
    return DenseMask(labels)
