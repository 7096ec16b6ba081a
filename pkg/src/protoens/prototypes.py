"""Parameter-free prototype head.

Class prototypes are masked averages of support features (per-shot spatial
mean, then mean over shots; the background prototype averages per-image
means over every support image). The query is classified per pixel by a
softmax over negative scaled cosine distances to the prototypes.

Score convention: score_j = -alpha * (1 - cos_sim(f, p_j)). Softmax shift
invariance makes this decode identically to any affine variant of the
cosine, so alpha changes probability calibration but never the argmax mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyClassError, ShapeMismatchError
from .tensor import (
    IGNORE_LABEL,
    DenseMask,
    FeatureVolume,
    ProbMap,
    cosine_distance_map,
    softmax_map,
)

BACKGROUND_LABEL = 0

ALPHA_DEFAULT = 1.0
# Score multiplier used by the original PANet head; sharpens probabilities
# without changing decoded masks.
ALPHA_PANET = 20.0

SupportPair = tuple[FeatureVolume, DenseMask]


@dataclass(frozen=True, eq=False)
class Prototype:
    """A single class embedding; class_id 0 is the background prototype."""

    class_id: int
    vector: np.ndarray

    def __post_init__(self):
        if not 0 <= self.class_id < IGNORE_LABEL:
            raise ValueError(f"class_id must be in [0, 254], got {self.class_id}")
        vec = np.asarray(self.vector, dtype=np.float32).ravel()
        if vec.size < 1:
            raise ValueError("prototype vector must be non-empty")
        if not np.isfinite(vec).all():
            raise ValueError("prototype vector contains NaN or Inf")
        vec = np.ascontiguousarray(vec)
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """One prototype per episode class plus exactly one background prototype."""

    prototypes: tuple[Prototype, ...]

    def __post_init__(self):
        protos = tuple(self.prototypes)
        if not protos:
            raise ValueError("prototype set must be non-empty")
        ids = [p.class_id for p in protos]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate prototype class ids: {sorted(ids)}")
        if ids.count(BACKGROUND_LABEL) != 1:
            raise ValueError("prototype set needs exactly one background prototype")
        lengths = {p.vector.size for p in protos}
        if len(lengths) != 1:
            raise ValueError(f"prototype vectors disagree on length: {sorted(lengths)}")
        object.__setattr__(self, "prototypes", protos)

    @property
    def class_ids(self) -> tuple[int, ...]:
        """Class ids in prediction order: background first, then ascending."""
        fg = sorted(p.class_id for p in self.prototypes if p.class_id != BACKGROUND_LABEL)
        return (BACKGROUND_LABEL, *fg)

    @property
    def channels(self) -> int:
        return self.prototypes[0].vector.size

    def matrix(self) -> np.ndarray:
        """(J, C) float32 matrix with rows in class_ids order."""
        by_id = {p.class_id: p.vector for p in self.prototypes}
        return np.stack([by_id[c] for c in self.class_ids])


def _check_support(volume: FeatureVolume, mask: DenseMask, index: int) -> None:
    if (volume.height, volume.width) != (mask.height, mask.width):
        raise ShapeMismatchError(
            f"support {index}: features are {volume.height}x{volume.width} but the mask is "
            f"{mask.height}x{mask.width}; resize features to the mask grid first")


def masked_average_pool(supports: Sequence[SupportPair], class_id: int) -> Prototype:
    """Prototype of one foreground class from its support shots.

    Each shot contributes the mean feature vector over pixels labelled
    class_id, and the per-shot means are averaged. Shots without the class
    do not contribute; if no shot contains it the episode is malformed.
    """
    if not supports:
        raise ValueError("supports must be non-empty")
    if not 0 < class_id < IGNORE_LABEL:
        raise ValueError(f"class_id must be a foreground label in [1, 254], got {class_id}")
    shot_means = []
    for i, (volume, mask) in enumerate(supports):
        _check_support(volume, mask, i)
        selected = mask.labels == class_id
        count = int(np.count_nonzero(selected))
        if count == 0:
            continue
        shot_means.append(volume.data[selected].sum(axis=0, dtype=np.float64) / count)
    if not shot_means:
        raise EmptyClassError(f"class {class_id} is absent from every support mask")
    return Prototype(class_id, np.mean(shot_means, axis=0).astype(np.float32))


def background_prototype(
    supports_by_class: Sequence[tuple[int, Sequence[SupportPair]]],
) -> Prototype:
    """Background prototype over all class x shot support images.

    Per image, the mean feature over non-ignore pixels whose label falls
    outside the episode class set; those per-image means are averaged over
    every support image. A support image with no such pixel makes the
    average undefined, so it raises EmptyClassError rather than silently
    renormalizing over fewer images.
    """
    if not supports_by_class:
        raise ValueError("supports_by_class must be non-empty")
    class_set = np.array(sorted({c for c, _ in supports_by_class}), dtype=np.uint8)
    image_means = []
    for class_id, shots in supports_by_class:
        for i, (volume, mask) in enumerate(shots):
            _check_support(volume, mask, i)
            selected = (mask.labels != IGNORE_LABEL) & ~np.isin(mask.labels, class_set)
            count = int(np.count_nonzero(selected))
            if count == 0:
                raise EmptyClassError(
                    f"support shot {i} for class {class_id} has no background pixels; "
                    "the background prototype is undefined for fully-foreground supports")
            image_means.append(volume.data[selected].sum(axis=0, dtype=np.float64) / count)
    return Prototype(BACKGROUND_LABEL, np.mean(image_means, axis=0).astype(np.float32))


def build_prototypes(
    supports_by_class: Sequence[tuple[int, Sequence[SupportPair]]],
) -> PrototypeSet:
    """Foreground prototypes for every episode class plus the background one."""
    protos = [masked_average_pool(shots, c) for c, shots in supports_by_class]
    protos.append(background_prototype(supports_by_class))
    return PrototypeSet(tuple(protos))


def group_supports(
    supports: Sequence[SupportPair],
    class_set: Sequence[int],
    support_class_ids: Sequence[int] | None = None,
) -> list[tuple[int, list[SupportPair]]]:
    """Group a flat support list into per-class shot lists.

    With a single episode class every shot belongs to it; for multi-class
    episodes the caller must say which class each shot was drawn for.
    """
    classes = sorted(set(int(c) for c in class_set))
    if not classes:
        raise ValueError("class_set must be non-empty")
    if support_class_ids is None:
        if len(classes) != 1:
            raise ValueError("support_class_ids is required for multi-class episodes")
        support_class_ids = [classes[0]] * len(supports)
    if len(support_class_ids) != len(supports):
        raise ValueError(
            f"{len(support_class_ids)} support class ids for {len(supports)} supports")
    groups = []
    for c in classes:
        shots = [s for s, sc in zip(supports, support_class_ids) if sc == c]
        if not shots:
            raise EmptyClassError(f"episode class {c} has no support shots")
        groups.append((c, shots))
    return groups


def score_map(query: FeatureVolume, protos: PrototypeSet, alpha: float = ALPHA_DEFAULT) -> np.ndarray:
    """Pre-softmax scores -alpha * distance, float64 (H, W, J).

    The class axis follows protos.class_ids: background first, then
    ascending class id.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if query.channels != protos.channels:
        raise ShapeMismatchError(
            f"query has {query.channels} channels, prototypes have {protos.channels}")
    return -alpha * cosine_distance_map(query, protos.matrix())


def predict_probability_map(
    query: FeatureVolume, protos: PrototypeSet, alpha: float = ALPHA_DEFAULT
) -> ProbMap:
    """Per-pixel class distribution over {background} + episode classes."""
    return softmax_map(score_map(query, protos, alpha))


def decode_class_mask(p: ProbMap, class_ids: Sequence[int]) -> DenseMask:
    """Argmax-decode a probability map and translate indices to class ids."""
    ids = np.asarray(class_ids, dtype=np.uint8)
    if ids.size != p.classes:
        raise ShapeMismatchError(f"{ids.size} class ids for {p.classes} probability columns")
    return DenseMask(ids[np.argmax(p.probs, axis=2)])


def predict_mask(
    query: FeatureVolume, protos: PrototypeSet, alpha: float = ALPHA_DEFAULT
) -> DenseMask:
    """Decoded class-id mask for the query; alpha never changes this output."""
    return decode_class_mask(predict_probability_map(query, protos, alpha), protos.class_ids)
