"""Shared builders for randomized test inputs."""

import numpy as np

from protoens import (
    BackboneBranch,
    DenseMask,
    FeatureVolume,
    ProbMap,
    Prototype,
    PrototypeSet,
)


def rand_volume(rng, h, w, c, scale=1.0):
    return FeatureVolume((scale * rng.normal(size=(h, w, c))).astype(np.float32))


def rand_mask(rng, h, w, classes, p_ignore=0.0):
    labels = rng.integers(0, classes + 1, size=(h, w)).astype(np.uint8)
    if p_ignore > 0:
        labels[rng.random((h, w)) < p_ignore] = 255
    return DenseMask(labels)


def rand_probmap(rng, h, w, j):
    scores = rng.normal(size=(h, w, j))
    e = np.exp(scores - scores.max(axis=2, keepdims=True))
    return ProbMap((e / e.sum(axis=2, keepdims=True)).astype(np.float32))


def rand_protoset(rng, class_ids, channels):
    protos = [Prototype(c, rng.normal(size=channels).astype(np.float32)) for c in class_ids]
    protos.append(Prototype(0, rng.normal(size=channels).astype(np.float32)))
    return PrototypeSet(tuple(protos))


def rand_branch(rng, backbone_id, channels, grid, class_ids, n_shots_per_class=1,
                masks=None):
    """A branch whose support masks guarantee every class and some background."""
    h, w = grid
    supports = []
    mask_list = []
    slot = 0
    for c in class_ids:
        for _ in range(n_shots_per_class):
            if masks is None:
                labels = np.zeros((h, w), dtype=np.uint8)
                top = int(rng.integers(0, h - 1))
                left = int(rng.integers(0, w - 1))
                labels[top:top + max(1, h // 2), left:left + max(1, w // 2)] = c
                mask = DenseMask(labels)
            else:
                mask = masks[slot]
            mask_list.append(mask)
            supports.append((rand_volume(rng, h, w, channels), mask))
            slot += 1
    query = rand_volume(rng, h, w, channels)
    return BackboneBranch(backbone_id, query, tuple(supports)), mask_list
