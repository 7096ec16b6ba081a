"""Multi-backbone ensembling.

Two strategies over per-backbone branches of one episode:

* voting: each branch runs the prototype head on its own features, and the
  per-branch outputs are combined with fixed non-negative weights. Mode
  "posterior-mean" averages the per-branch softmax probability maps;
  mode "logit-sum" averages the pre-softmax score maps and applies a single
  softmax afterwards. The modes decode identically for one branch but can
  differ for several.
* fusion: branch feature volumes are concatenated along the channel axis
  and the prototype head runs once on the merged volume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EpisodeInconsistencyError, InvalidConfigError, ShapeMismatchError
from .prototypes import (
    ALPHA_DEFAULT,
    BACKGROUND_LABEL,
    PrototypeSet,
    SupportPair,
    build_prototypes,
    decode_class_mask,
    group_supports,
    predict_probability_map,
    score_map,
)
from .tensor import (
    ZERO_NORM_EPS,
    DenseMask,
    FeatureVolume,
    ProbMap,
    bilinear_resize,
    channel_concat,
    softmax_map,
)

STRATEGIES = ("single", "voting", "fusion")
VOTE_MODES = ("posterior-mean", "logit-sum")


@dataclass(frozen=True, eq=False)
class BackboneBranch:
    """One backbone's view of an episode: query features plus support pairs."""

    backbone_id: str
    query: FeatureVolume
    supports: tuple[SupportPair, ...]

    def __post_init__(self):
        object.__setattr__(self, "supports", tuple(self.supports))
        if not self.supports:
            raise ValueError(f"branch {self.backbone_id!r} has no supports")
        channels = self.query.channels
        for i, (volume, _) in enumerate(self.supports):
            if volume.channels != channels:
                raise ShapeMismatchError(
                    f"branch {self.backbone_id!r}: support {i} has {volume.channels} "
                    f"channels, query has {channels}")


@dataclass(frozen=True)
class VotingConfig:
    """Branch weights and combination mode.

    weights=None means uniform 1/B at vote time; explicit weights must be
    non-negative and sum to 1 within 1e-9.
    """

    weights: tuple[float, ...] | None = None
    mode: str = "posterior-mean"

    def __post_init__(self):
        if self.mode not in VOTE_MODES:
            raise InvalidConfigError(f"unknown vote mode {self.mode!r}, expected one of {VOTE_MODES}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if not w:
                raise InvalidConfigError("weights must be non-empty when given")
            if any(x < 0 for x in w):
                raise InvalidConfigError(f"weights must be non-negative, got {w}")
            if abs(sum(w) - 1.0) > 1e-9:
                raise InvalidConfigError(f"weights must sum to 1 within 1e-9, got sum {sum(w)!r}")
            object.__setattr__(self, "weights", w)

    def resolve(self, n_branches: int) -> np.ndarray:
        if self.weights is None:
            return np.full(n_branches, 1.0 / n_branches)
        if len(self.weights) != n_branches:
            raise InvalidConfigError(
                f"{len(self.weights)} weights for {n_branches} branches")
        return np.asarray(self.weights, dtype=np.float64)


def infer_class_set(branch: BackboneBranch) -> tuple[int, ...]:
    """Foreground classes present across a branch's support masks."""
    classes: set[int] = set()
    for _, mask in branch.supports:
        classes.update(mask.present_classes())
    if not classes:
        raise EpisodeInconsistencyError(
            f"branch {branch.backbone_id!r}: no foreground class in any support mask")
    return tuple(sorted(classes))


def combine_probability_maps(maps: Sequence[ProbMap], weights) -> ProbMap:
    """Weighted sum of probability maps (the posterior-mean join)."""
    w = np.asarray(weights, dtype=np.float64)
    if len(maps) != w.size:
        raise InvalidConfigError(f"{w.size} weights for {len(maps)} probability maps")
    if not maps:
        raise ValueError("no probability maps to combine")
    shape = maps[0].probs.shape
    for i, m in enumerate(maps):
        if m.probs.shape != shape:
            raise ShapeMismatchError(f"probability map {i} has shape {m.probs.shape}, expected {shape}")
    acc = np.zeros(shape, dtype=np.float64)
    for wi, m in zip(w, maps):
        acc += wi * m.probs.astype(np.float64)
    return ProbMap(acc.astype(np.float32))


def combine_score_maps(score_maps: Sequence[np.ndarray], weights) -> np.ndarray:
    """Weighted sum of pre-softmax score grids (the logit-sum join)."""
    w = np.asarray(weights, dtype=np.float64)
    if len(score_maps) != w.size:
        raise InvalidConfigError(f"{w.size} weights for {len(score_maps)} score maps")
    if not score_maps:
        raise ValueError("no score maps to combine")
    shape = np.asarray(score_maps[0]).shape
    for i, s in enumerate(score_maps):
        if np.asarray(s).shape != shape:
            raise ShapeMismatchError(f"score map {i} has shape {np.asarray(s).shape}, expected {shape}")
    acc = np.zeros(shape, dtype=np.float64)
    for wi, s in zip(w, score_maps):
        acc += wi * np.asarray(s, dtype=np.float64)
    return acc


def _branch_prototypes(
    branch: BackboneBranch,
    class_set: Sequence[int],
    support_class_ids: Sequence[int] | None,
) -> PrototypeSet:
    return build_prototypes(group_supports(branch.supports, class_set, support_class_ids))


def vote(
    branches: Sequence[BackboneBranch],
    cfg: VotingConfig | None = None,
    alpha: float = ALPHA_DEFAULT,
    class_set: Sequence[int] | None = None,
    support_class_ids: Sequence[int] | None = None,
) -> ProbMap:
    """Combine per-branch prototype-head predictions into one ProbMap.

    Branches must already be aligned: every support volume at its mask's
    resolution and all query volumes on one spatial grid.
    """
    if not branches:
        raise ValueError("vote requires at least one branch")
    cfg = cfg if cfg is not None else VotingConfig()
    weights = cfg.resolve(len(branches))
    if class_set is None:
        class_set = infer_class_set(branches[0])
    grid = (branches[0].query.height, branches[0].query.width)
    for i, b in enumerate(branches):
        if (b.query.height, b.query.width) != grid:
            raise ShapeMismatchError(
                f"branch {i} query grid is {b.query.height}x{b.query.width}, expected {grid[0]}x{grid[1]}")
    if cfg.mode == "posterior-mean":
        maps = [
            predict_probability_map(b.query, _branch_prototypes(b, class_set, support_class_ids), alpha)
            for b in branches
        ]
        return combine_probability_maps(maps, weights)
    score_maps = [
        score_map(b.query, _branch_prototypes(b, class_set, support_class_ids), alpha)
        for b in branches
    ]
    return softmax_map(combine_score_maps(score_maps, weights))


def _l2_normalized(volume: FeatureVolume) -> FeatureVolume:
    data = volume.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=2, keepdims=True)
    out = np.where(norms < ZERO_NORM_EPS, 0.0, data / np.where(norms < ZERO_NORM_EPS, 1.0, norms))
    return FeatureVolume(out.astype(np.float32))


def fuse(branches: Sequence[BackboneBranch], l2_normalize: bool = False) -> BackboneBranch:
    """Merge branches into one by channel-concatenating their volumes.

    Query and per-slot support volumes are concatenated in branch order;
    masks come from the first branch and must agree across branches.
    l2_normalize (off by default, the plain-concatenation behavior) scales
    every pixel vector of each branch to unit norm before concatenation so
    branches with different feature magnitudes contribute equally.
    """
    if not branches:
        raise ValueError("fuse requires at least one branch")
    first = branches[0]
    for b in branches[1:]:
        if len(b.supports) != len(first.supports):
            raise EpisodeInconsistencyError(
                f"branch {b.backbone_id!r} has {len(b.supports)} supports, "
                f"branch {first.backbone_id!r} has {len(first.supports)}")
        for j, ((_, m0), (_, mj)) in enumerate(zip(first.supports, b.supports)):
            if not np.array_equal(m0.labels, mj.labels):
                raise EpisodeInconsistencyError(
                    f"support {j}: mask differs between branches "
                    f"{first.backbone_id!r} and {b.backbone_id!r}")
    if len(branches) == 1 and not l2_normalize:
        return first

    def prep(v: FeatureVolume) -> FeatureVolume:
        return _l2_normalized(v) if l2_normalize else v

    query = channel_concat([prep(b.query) for b in branches])
    supports = tuple(
        (channel_concat([prep(b.supports[j][0]) for b in branches]), first.supports[j][1])
        for j in range(len(first.supports))
    )
    merged_id = "+".join(b.backbone_id for b in branches)
    return BackboneBranch(merged_id, query, supports)


def align_branch(branch: BackboneBranch, grid: tuple[int, int]) -> BackboneBranch:
    """Resize support volumes to their mask grids and the query to `grid`."""
    supports = tuple(
        (bilinear_resize(v, m.height, m.width), m) for v, m in branch.supports
    )
    query = bilinear_resize(branch.query, grid[0], grid[1])
    return BackboneBranch(branch.backbone_id, query, supports)


def predict_ensemble(
    branches: Sequence[BackboneBranch],
    strategy: str = "voting",
    cfg: VotingConfig | None = None,
    alpha: float = ALPHA_DEFAULT,
    grid: tuple[int, int] | None = None,
    class_set: Sequence[int] | None = None,
    support_class_ids: Sequence[int] | None = None,
) -> tuple[ProbMap, DenseMask]:
    """Full episode prediction: align, ensemble, and decode to class ids.

    grid is the output resolution (defaults to the first branch's query
    dims); every branch is aligned to it before prediction.
    """
    if not branches:
        raise ValueError("predict_ensemble requires at least one branch")
    if strategy not in STRATEGIES:
        raise InvalidConfigError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    if strategy == "single" and len(branches) != 1:
        raise InvalidConfigError(f"strategy 'single' expects exactly one branch, got {len(branches)}")
    if grid is None:
        grid = (branches[0].query.height, branches[0].query.width)
    aligned = [align_branch(b, grid) for b in branches]
    if class_set is None:
        class_set = infer_class_set(aligned[0])
    if strategy == "single":
        protos = _branch_prototypes(aligned[0], class_set, support_class_ids)
        prob = predict_probability_map(aligned[0].query, protos, alpha)
    elif strategy == "voting":
        prob = vote(aligned, cfg, alpha, class_set, support_class_ids)
    else:
        fused = fuse(aligned)
        protos = _branch_prototypes(fused, class_set, support_class_ids)
        prob = predict_probability_map(fused.query, protos, alpha)
    ids = (BACKGROUND_LABEL, *sorted(set(int(c) for c in class_set)))
    return prob, decode_class_mask(prob, ids)
