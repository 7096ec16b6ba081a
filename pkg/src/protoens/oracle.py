"""Scalar-loop reference implementations.

Everything here is deliberately written pixel by pixel with plain Python
floats and no vectorization or algebraic restructuring; these are the
comparison baselines for the numpy paths. Keep them dumb.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .prototypes import PrototypeSet
from .tensor import IGNORE_LABEL, DenseMask, FeatureVolume, ProbMap


def oracle_cosine_distance(a: Sequence[float], b: Sequence[float]) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += float(x) * float(y)
        na += float(x) * float(x)
        nb += float(y) * float(y)
    na = math.sqrt(na)
    nb = math.sqrt(nb)
    if na < 1e-12 or nb < 1e-12:
        return 1.0
    sim = dot / (na * nb)
    sim = max(-1.0, min(1.0, sim))
    return 1.0 - sim


def oracle_softmax(scores: Sequence[float]) -> list[float]:
    top = max(scores)
    exps = [math.exp(s - top) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def _ordered_vectors(protos: PrototypeSet) -> list[list[float]]:
    by_id = {p.class_id: p.vector for p in protos.prototypes}
    return [[float(v) for v in by_id[c]] for c in protos.class_ids]


def oracle_predict(query: FeatureVolume, protos: PrototypeSet, alpha: float = 1.0) -> ProbMap:
    """Per-pixel, per-prototype scalar reimplementation of the head."""
    vectors = _ordered_vectors(protos)
    out = np.zeros((query.height, query.width, len(vectors)), dtype=np.float32)
    for y in range(query.height):
        for x in range(query.width):
            pixel = [float(v) for v in query.data[y, x]]
            scores = [-alpha * oracle_cosine_distance(pixel, p) for p in vectors]
            out[y, x, :] = oracle_softmax(scores)
    return ProbMap(out)


def oracle_score_map(query: FeatureVolume, protos: PrototypeSet, alpha: float = 1.0) -> np.ndarray:
    """Pre-softmax scores -alpha * distance via scalar loops, float64 (H, W, J)."""
    vectors = _ordered_vectors(protos)
    out = np.zeros((query.height, query.width, len(vectors)), dtype=np.float64)
    for y in range(query.height):
        for x in range(query.width):
            pixel = [float(v) for v in query.data[y, x]]
            for j, p in enumerate(vectors):
                out[y, x, j] = -alpha * oracle_cosine_distance(pixel, p)
    return out


def oracle_argmax_decode(p: ProbMap) -> DenseMask:
    labels = np.zeros((p.height, p.width), dtype=np.uint8)
    for y in range(p.height):
        for x in range(p.width):
            best, best_j = -1.0, 0
            for j in range(p.classes):
                v = float(p.probs[y, x, j])
                if v > best:
                    best, best_j = v, j
            labels[y, x] = best_j
    return DenseMask(labels)


def oracle_predict_mask(query: FeatureVolume, protos: PrototypeSet, alpha: float = 1.0) -> DenseMask:
    p = oracle_predict(query, protos, alpha)
    idx = oracle_argmax_decode(p)
    ids = protos.class_ids
    labels = np.zeros((p.height, p.width), dtype=np.uint8)
    for y in range(p.height):
        for x in range(p.width):
            labels[y, x] = ids[idx.labels[y, x]]
    return DenseMask(labels)


def oracle_vote_probability(prob_maps: Sequence[ProbMap], weights: Sequence[float]) -> ProbMap:
    """Pixel-loop weighted sum of probability maps (posterior-mean join)."""
    h, w, j = prob_maps[0].probs.shape
    out = np.zeros((h, w, j), dtype=np.float32)
    for y in range(h):
        for x in range(w):
            for k in range(j):
                acc = 0.0
                for wt, m in zip(weights, prob_maps):
                    acc += float(wt) * float(m.probs[y, x, k])
                out[y, x, k] = acc
    return ProbMap(out)


def oracle_vote_scores(score_maps: Sequence[np.ndarray], weights: Sequence[float]) -> ProbMap:
    """Pixel-loop weighted sum of score grids, then softmax (logit-sum join)."""
    h, w, j = np.asarray(score_maps[0]).shape
    out = np.zeros((h, w, j), dtype=np.float32)
    for y in range(h):
        for x in range(w):
            combined = []
            for k in range(j):
                acc = 0.0
                for wt, s in zip(weights, score_maps):
                    acc += float(wt) * float(s[y, x, k])
                combined.append(acc)
            out[y, x, :] = oracle_softmax(combined)
    return ProbMap(out)


def oracle_concat(volumes: Sequence[FeatureVolume]) -> FeatureVolume:
    h, w = volumes[0].height, volumes[0].width
    total = sum(v.channels for v in volumes)
    out = np.zeros((h, w, total), dtype=np.float32)
    for y in range(h):
        for x in range(w):
            stacked: list[float] = []
            for v in volumes:
                stacked.extend(float(c) for c in v.data[y, x])
            out[y, x, :] = stacked
    return FeatureVolume(out)


def oracle_bilinear_resize(v: FeatureVolume, out_h: int, out_w: int) -> FeatureVolume:
    def src(i: int, n_in: int, n_out: int) -> float:
        if n_in == 1 or n_out == 1:
            return 0.0
        return i * float(n_in - 1) / float(n_out - 1)

    out = np.zeros((out_h, out_w, v.channels), dtype=np.float32)
    for oy in range(out_h):
        sy = src(oy, v.height, out_h)
        y0 = min(int(math.floor(sy)), max(v.height - 2, 0))
        fy = sy - y0
        y1 = min(y0 + 1, v.height - 1)
        for ox in range(out_w):
            sx = src(ox, v.width, out_w)
            x0 = min(int(math.floor(sx)), max(v.width - 2, 0))
            fx = sx - x0
            x1 = min(x0 + 1, v.width - 1)
            for c in range(v.channels):
                top = float(v.data[y0, x0, c]) * (1.0 - fx) + float(v.data[y0, x1, c]) * fx
                bottom = float(v.data[y1, x0, c]) * (1.0 - fx) + float(v.data[y1, x1, c]) * fx
                out[oy, ox, c] = top * (1.0 - fy) + bottom * fy
    return FeatureVolume(out)


def oracle_masked_average_pool(supports, class_id: int) -> list[float]:
    """Per-shot mean over selected pixels, then mean over contributing shots."""
    shot_means = []
    for volume, mask in supports:
        acc = [0.0] * volume.channels
        count = 0
        for y in range(mask.height):
            for x in range(mask.width):
                if int(mask.labels[y, x]) == class_id:
                    count += 1
                    for c in range(volume.channels):
                        acc[c] += float(volume.data[y, x, c])
        if count:
            shot_means.append([a / count for a in acc])
    if not shot_means:
        raise ValueError(f"class {class_id} absent from every support")
    n = len(shot_means)
    return [sum(m[c] for m in shot_means) / n for c in range(len(shot_means[0]))]


def oracle_background_prototype(supports_by_class) -> list[float]:
    class_set = {c for c, _ in supports_by_class}
    image_means = []
    for _, shots in supports_by_class:
        for volume, mask in shots:
            acc = [0.0] * volume.channels
            count = 0
            for y in range(mask.height):
                for x in range(mask.width):
                    label = int(mask.labels[y, x])
                    if label != IGNORE_LABEL and label not in class_set:
                        count += 1
                        for c in range(volume.channels):
                            acc[c] += float(volume.data[y, x, c])
            if count == 0:
                raise ValueError("support image with no background pixels")
            image_means.append([a / count for a in acc])
    n = len(image_means)
    return [sum(m[c] for m in image_means) / n for c in range(len(image_means[0]))]


def oracle_iou(pred: DenseMask, gt: DenseMask, class_id: int) -> float:
    """IoU via explicit pixel-set intersection and union."""
    pred_set = set()
    gt_set = set()
    for y in range(gt.height):
        for x in range(gt.width):
            if int(gt.labels[y, x]) == IGNORE_LABEL:
                continue
            if int(pred.labels[y, x]) == class_id:
                pred_set.add((y, x))
            if int(gt.labels[y, x]) == class_id:
                gt_set.add((y, x))
    union = pred_set | gt_set
    if not union:
        return 0.0
    return len(pred_set & gt_set) / len(union)
