"""Fold construction, episode sampling, and the evaluation loop.

Sampling decisions for all episodes of a run are drawn sequentially from
one seeded generator, so a (seed, manifest, config) triple fixes the whole
episode sequence; evaluation of the pre-drawn episodes can then run on
worker threads because confusion-count merging is integer-associative.
"""

from __future__ import annotations

import os
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensemble import BackboneBranch, VotingConfig, predict_ensemble
from .errors import (
    DatasetTooSmallError,
    EvaluationError,
    InvalidConfigError,
)
from .fvolio import read_fvol, read_mask, write_mask
from .manifest import Manifest
from .metrics import ConfusionCounts, FoldReport, miou
from .tensor import DenseMask, FeatureVolume

THREADS_ENV = "PROTOENS_THREADS"


@dataclass(frozen=True)
class FoldSpec:
    """One of four disjoint class partitions; evaluation draws from test_classes."""

    fold_index: int
    train_classes: tuple[int, ...]
    test_classes: tuple[int, ...]


def build_folds(class_count: int) -> list[FoldSpec]:
    """Partition classes 1..class_count into four equal test subsets.

    Fold i tests the i-th quarter of the ascending class ids (so 20 classes
    give fold 0 the test set {1..5}).
    """
    if class_count < 4 or class_count % 4 != 0:
        raise ValueError(f"class count must be a positive multiple of 4, got {class_count}")
    classes = list(range(1, class_count + 1))
    per_fold = class_count // 4
    folds = []
    for i in range(4):
        test = classes[i * per_fold:(i + 1) * per_fold]
        train = classes[:i * per_fold] + classes[(i + 1) * per_fold:]
        folds.append(FoldSpec(i, tuple(train), tuple(test)))
    return folds


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines an evaluation run besides the manifest."""

    n_episodes: int = 1000
    seed: int = 0
    n_way: int = 1
    k_shot: int = 1
    strategy: str = "voting"
    vote_mode: str = "posterior-mean"
    weights: tuple[float, ...] | None = None
    alpha: float = 1.0
    backbones: tuple[str, ...] | None = None
    repeats: int = 1

    def __post_init__(self):
        if self.n_episodes < 1:
            raise InvalidConfigError(f"n_episodes must be >= 1, got {self.n_episodes}")
        if self.n_way < 1 or self.k_shot < 1:
            raise InvalidConfigError(f"n_way and k_shot must be >= 1, got {self.n_way}, {self.k_shot}")
        if self.repeats < 1:
            raise InvalidConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.strategy not in ("single", "voting", "fusion"):
            raise InvalidConfigError(f"unknown strategy {self.strategy!r}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.backbones is not None:
            object.__setattr__(self, "backbones", tuple(self.backbones))
        if self.alpha <= 0:
            raise InvalidConfigError(f"alpha must be positive, got {self.alpha}")
        self.voting_config()  # validate weights/mode eagerly

    def voting_config(self) -> VotingConfig:
        return VotingConfig(weights=self.weights, mode=self.vote_mode)

    def echo(self) -> dict:
        return {
            "episodes": self.n_episodes,
            "seed": self.seed,
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "strategy": self.strategy,
            "vote_mode": self.vote_mode,
            "weights": list(self.weights) if self.weights is not None else None,
            "alpha": self.alpha,
            "backbones": list(self.backbones) if self.backbones is not None else None,
            "repeats": self.repeats,
        }


@dataclass(frozen=True)
class EpisodePlan:
    """Pure sampling decision for one episode; no file access involved."""

    class_set: tuple[int, ...]
    support_image_ids: tuple[str, ...]
    support_class_ids: tuple[int, ...]
    query_image_id: str


@dataclass(frozen=True)
class Episode:
    """A fully loaded episode: per-backbone branches plus the query truth."""

    class_set: tuple[int, ...]
    support_class_ids: tuple[int, ...]
    branches: tuple[BackboneBranch, ...]
    query_gt: DenseMask
    query_image_id: str
    support_image_ids: tuple[str, ...]


def _class_pools(manifest: Manifest, fold: FoldSpec, k_shot: int) -> dict[int, list[str]]:
    pools = {c: [e.image_id for e in manifest.images_with_class(c)] for c in fold.test_classes}
    for c in sorted(pools):
        if len(pools[c]) < k_shot + 1:
            raise DatasetTooSmallError(
                f"class {c} has {len(pools[c])} annotated images; {k_shot}-shot episodes "
                f"need at least {k_shot + 1}")
    return pools


def _plan_one(rng: np.random.Generator, pools: dict[int, list[str]],
              test_classes: Sequence[int], cfg: RunConfig) -> EpisodePlan:
    test_arr = np.asarray(sorted(test_classes))
    for _ in range(100):
        drawn = [int(c) for c in rng.choice(test_arr, size=cfg.n_way, replace=False)]
        query_class = drawn[0]
        support_ids: list[str] = []
        support_classes: list[int] = []
        query_id = ""
        for c in drawn:
            pool = pools[c]
            take = cfg.k_shot + (1 if c == query_class else 0)
            picked = [pool[int(i)] for i in rng.choice(len(pool), size=take, replace=False)]
            if c == query_class:
                query_id = picked[-1]
                picked = picked[:-1]
            support_ids.extend(picked)
            support_classes.extend([c] * cfg.k_shot)
        if query_id not in support_ids:
            return EpisodePlan(
                class_set=tuple(sorted(set(drawn))),
                support_image_ids=tuple(support_ids),
                support_class_ids=tuple(support_classes),
                query_image_id=query_id,
            )
    raise DatasetTooSmallError(
        f"could not draw a query disjoint from the supports for classes {sorted(drawn)}")


def plan_episodes(manifest: Manifest, fold: FoldSpec, cfg: RunConfig) -> list[EpisodePlan]:
    """Draw every episode of a run sequentially from the (seed, fold) stream."""
    if cfg.n_way > len(fold.test_classes):
        raise InvalidConfigError(
            f"n_way {cfg.n_way} exceeds the {len(fold.test_classes)} test classes of fold "
            f"{fold.fold_index}")
    pools = _class_pools(manifest, fold, cfg.k_shot)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, fold.fold_index)))
    return [_plan_one(rng, pools, fold.test_classes, cfg) for _ in range(cfg.n_episodes)]


def sample_episode(manifest: Manifest, fold: FoldSpec, cfg: RunConfig,
                   rng: np.random.Generator) -> Episode:
    """Sample and load a single episode from an explicit generator state."""
    pools = _class_pools(manifest, fold, cfg.k_shot)
    plan = _plan_one(rng, pools, fold.test_classes, cfg)
    return load_episode(manifest, plan, cfg.backbones)


class VolumeStore:
    """Thread-safe LRU cache over manifest mask and feature-volume files."""

    def __init__(self, manifest: Manifest, capacity: int = 256):
        self._manifest = manifest
        self._capacity = capacity
        self._lock = threading.Lock()
        self._cache: OrderedDict[tuple, object] = OrderedDict()

    def _get(self, key, loader):
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        value = loader()
        with self._lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self._capacity:
                self._cache.popitem(last=False)
        return value

    def mask(self, image_id: str) -> DenseMask:
        entry = self._manifest.entry(image_id)
        path = self._manifest.resolve(entry.mask_path)
        return self._get(("mask", image_id), lambda: read_mask(path))

    def fvol(self, image_id: str, backbone: str) -> FeatureVolume:
        entry = self._manifest.entry(image_id)
        path = self._manifest.resolve(entry.fvol_paths[backbone])
        return self._get(("fvol", image_id, backbone), lambda: read_fvol(path))


def load_episode(manifest: Manifest, plan: EpisodePlan,
                 backbones: Sequence[str] | None = None,
                 store: VolumeStore | None = None) -> Episode:
    """Materialize a plan into per-backbone branches."""
    chosen = _select_backbones(manifest, backbones)
    store = store if store is not None else VolumeStore(manifest)
    query_gt = store.mask(plan.query_image_id)
    branches = []
    for b in chosen:
        query = store.fvol(plan.query_image_id, b)
        supports = tuple(
            (store.fvol(sid, b), store.mask(sid)) for sid in plan.support_image_ids
        )
        branches.append(BackboneBranch(b, query, supports))
    return Episode(
        class_set=plan.class_set,
        support_class_ids=plan.support_class_ids,
        branches=tuple(branches),
        query_gt=query_gt,
        query_image_id=plan.query_image_id,
        support_image_ids=plan.support_image_ids,
    )


def _select_backbones(manifest: Manifest, backbones: Sequence[str] | None) -> tuple[str, ...]:
    if backbones is None:
        return manifest.backbones
    unknown = [b for b in backbones if b not in manifest.backbones]
    if unknown:
        raise InvalidConfigError(
            f"backbones {unknown} not in manifest (has {list(manifest.backbones)})")
    return tuple(backbones)


def thread_count() -> int:
    """Worker threads for episode evaluation, from PROTOENS_THREADS (0 = auto)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 0:
        raise InvalidConfigError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def run_evaluation(manifest: Manifest, fold: FoldSpec, cfg: RunConfig,
                   dump_dir=None) -> FoldReport:
    """Evaluate n_episodes on one fold and report per-class IoU and mIoU.

    Confusion counts accumulate across all episodes of the fold and IoU is
    computed once at the end; classes of the fold that were never sampled
    report IoU 0 by the degenerate-count convention.
    """
    chosen = _select_backbones(manifest, cfg.backbones)
    if cfg.strategy == "single" and len(chosen) != 1:
        raise InvalidConfigError(
            f"strategy 'single' needs exactly one backbone, got {list(chosen)}")
    plans = plan_episodes(manifest, fold, cfg)
    store = VolumeStore(manifest)
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)

    def evaluate(indexed_plan) -> ConfusionCounts:
        index, plan = indexed_plan
        try:
            episode = load_episode(manifest, plan, chosen, store)
            _, pred = predict_ensemble(
                episode.branches,
                strategy=cfg.strategy,
                cfg=cfg.voting_config(),
                alpha=cfg.alpha,
                grid=(episode.query_gt.height, episode.query_gt.width),
                class_set=episode.class_set,
                support_class_ids=episode.support_class_ids,
            )
        except Exception as exc:
            raise EvaluationError(f"episode {index} failed: {exc}") from exc
        part = ConfusionCounts()
        part.add(pred, episode.query_gt, episode.class_set)
        if dump_dir is not None:
            write_mask(pred, dump_dir / f"fold{fold.fold_index}_ep{index:05d}_pred.png")
        return part

    workers = thread_count()
    indexed = list(enumerate(plans))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(evaluate, indexed))
    else:
        parts = [evaluate(ip) for ip in indexed]

    totals = ConfusionCounts()
    for part in parts:
        totals.merge(part)
    per_class = {c: totals.iou(c) for c in fold.test_classes}
    return FoldReport(
        fold_index=fold.fold_index,
        per_class_iou=per_class,
        miou=miou(per_class),
        episodes=cfg.n_episodes,
        seed=cfg.seed,
        config=cfg.echo(),
    )


def run_repeated(manifest: Manifest, fold: FoldSpec, cfg: RunConfig,
                 dump_dir=None) -> list[FoldReport]:
    """Run cfg.repeats evaluations with seeds seed, seed+1, ... on one fold."""
    return [
        run_evaluation(manifest, fold, replace(cfg, seed=cfg.seed + r), dump_dir=dump_dir)
        for r in range(cfg.repeats)
    ]
