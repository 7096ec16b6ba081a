"""Dense tensor primitives shared by the prediction and evaluation stages.

Feature volumes, label masks, and probability maps are immutable wrappers
around numpy arrays in row-major (row, column, channel) layout. Storage is
float32 / uint8; every reduction (sums, dot products, interpolation blends)
runs in float64 before rounding back to float32. All containers are safe to
share read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError

# Mask pixels with this value are excluded from pooling, prediction scoring,
# and metric accumulation.
IGNORE_LABEL = 255

# Vectors with a norm below this are treated as orthogonal to everything.
ZERO_NORM_EPS = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FeatureVolume:
    """Dense H x W x C grid of finite float32 embedding vectors."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"feature volume must be (H, W, C), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"feature volume dims must all be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature volume contains NaN or Inf")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class DenseMask:
    """H x W uint8 label grid; 0 is background, 255 is ignore."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"mask labels must be integers, got dtype {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-d (H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"mask dims must be >= 1, got {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("mask labels must fit in uint8")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "labels", _frozen(arr))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def present_classes(self) -> tuple[int, ...]:
        """Foreground class ids present in the mask (0 and 255 excluded)."""
        values = np.unique(self.labels)
        return tuple(int(v) for v in values if v != 0 and v != IGNORE_LABEL)


@dataclass(frozen=True, eq=False)
class ProbMap:
    """H x W x (L+1) per-pixel class distribution; background at index 0."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"probability map must be (H, W, L+1), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"probability map dims must be >= 1, got {arr.shape}")
        if arr.shape[2] > 255:
            raise ValueError("at most 255 classes are supported (255 is the ignore label)")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        dev = np.abs(arr.sum(axis=2, dtype=np.float64) - 1.0).max()
        if dev > 1e-5:
            raise ValueError(f"per-pixel probabilities must sum to 1 within 1e-5, max deviation {dev:.3g}")
        object.__setattr__(self, "probs", _frozen(arr))

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def classes(self) -> int:
        return self.probs.shape[2]


def _axis_samples(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Corner-aligned source rows/cols: integer base index plus fraction.

    Degenerate axes (a single input or output sample) pin to index 0. The
    product-before-division order keeps src exact for identity resizes and
    for the last output sample, which is what makes corner pixels and
    same-size copies bit-exact.
    """
    if n_in == 1 or n_out == 1:
        return np.zeros(n_out, dtype=np.intp), np.zeros(n_out, dtype=np.float64)
    src = np.arange(n_out, dtype=np.float64) * float(n_in - 1) / float(n_out - 1)
    lo = np.minimum(np.floor(src).astype(np.intp), n_in - 2)
    return lo, src - lo


def bilinear_resize(v: FeatureVolume, out_h: int, out_w: int) -> FeatureVolume:
    """Channel-wise corner-aligned bilinear resampling to out_h x out_w.

    Output corners sample input corners exactly; resizing to the input size
    returns a bit-identical copy.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    if (out_h, out_w) == (v.height, v.width):
        return FeatureVolume(v.data)
    y0, fy = _axis_samples(v.height, out_h)
    x0, fx = _axis_samples(v.width, out_w)
    y1 = np.minimum(y0 + 1, v.height - 1)
    x1 = np.minimum(x0 + 1, v.width - 1)
    d = v.data.astype(np.float64)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = d[y0][:, x0] * (1.0 - fx) + d[y0][:, x1] * fx
    bottom = d[y1][:, x0] * (1.0 - fx) + d[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return FeatureVolume(out.astype(np.float32))


def channel_concat(volumes: Sequence[FeatureVolume]) -> FeatureVolume:
    """Concatenate volumes along the channel axis, in input order."""
    if not volumes:
        raise ValueError("channel_concat requires at least one volume")
    h, w = volumes[0].height, volumes[0].width
    for i, v in enumerate(volumes):
        if (v.height, v.width) != (h, w):
            raise ShapeMismatchError(
                f"volume {i} is {v.height}x{v.width}, expected {h}x{w}")
    if len(volumes) == 1:
        return FeatureVolume(volumes[0].data)
    return FeatureVolume(np.concatenate([v.data for v in volumes], axis=2))


def cosine_distance(a, b) -> float:
    """1 - cosine similarity, in [0, 2].

    If either vector has norm below 1e-12 the pair is treated as orthogonal
    and the distance is exactly 1; masked-out or dead channels must not
    abort an evaluation.
    """
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.size != vb.size:
        raise ShapeMismatchError(f"vector lengths differ: {va.size} vs {vb.size}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        return 1.0
    sim = float(va @ vb) / (na * nb)
    return 1.0 - min(1.0, max(-1.0, sim))


def cosine_distance_map(volume: FeatureVolume, vectors: np.ndarray) -> np.ndarray:
    """Cosine distance from every pixel vector to every row of `vectors`.

    Returns a float64 (H, W, J) array with the same zero-norm rule as
    cosine_distance.
    """
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"vectors must be a (J, C) matrix, got shape {mat.shape}")
    if mat.shape[1] != volume.channels:
        raise ShapeMismatchError(
            f"vectors have {mat.shape[1]} channels, volume has {volume.channels}")
    q = volume.data.reshape(-1, volume.channels).astype(np.float64)
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    pn = np.linalg.norm(mat, axis=1, keepdims=True)
    q = np.where(qn < ZERO_NORM_EPS, 0.0, q / np.where(qn < ZERO_NORM_EPS, 1.0, qn))
    p = np.where(pn < ZERO_NORM_EPS, 0.0, mat / np.where(pn < ZERO_NORM_EPS, 1.0, pn))
    sim = np.clip(q @ p.T, -1.0, 1.0)
    return (1.0 - sim).reshape(volume.height, volume.width, mat.shape[0])


def softmax_scores(scores) -> np.ndarray:
    """Numerically stable softmax of a finite score vector.

    Returns float64 probabilities that sum to 1 within 1e-7.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("softmax of an empty score vector")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_map(scores: np.ndarray) -> ProbMap:
    """Softmax along the trailing class axis of an (H, W, J) score grid."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 3:
        raise ValueError(f"score grid must be (H, W, J), got shape {s.shape}")
    e = np.exp(s - s.max(axis=2, keepdims=True))
    return ProbMap((e / e.sum(axis=2, keepdims=True)).astype(np.float32))


def argmax_decode(p: ProbMap) -> DenseMask:
    """Per-pixel argmax as class-axis indices; ties go to the lowest index."""
    return DenseMask(np.argmax(p.probs, axis=2).astype(np.uint8))
