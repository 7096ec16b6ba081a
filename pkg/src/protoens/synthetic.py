"""Seeded synthetic manifests emulating complementary backbones.

Every image carries one rectangular foreground blob of one class. Per
backbone, pixel features are a class-specific center scaled by the
separation plus isotropic gaussian noise; classes listed in a backbone's
corruption set get pure unit noise instead, so that backbone is blind to
them. Generation is byte-reproducible from (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fvolio import write_fvol, write_mask
from .manifest import ImageEntry, Manifest, save_manifest
from .tensor import DenseMask, FeatureVolume

CorruptionMap = tuple[tuple[str, frozenset[int]], ...]


def pairwise_blind_corruption(class_count: int = 8,
                              names: tuple[str, str, str] = ("synth0", "synth1", "synth2"),
                              ) -> CorruptionMap:
    """Three backbones where every pair shares blind classes the third sees.

    Classes cycle through four roles: blind to backbones (0,1), blind to
    (0,2), blind to (1,2), and clean everywhere. Any two-backbone ensemble
    therefore has classes it cannot segment while the full trio can.
    """
    sets: list[set[int]] = [set(), set(), set()]
    for c in range(1, class_count + 1):
        role = (c - 1) % 4
        if role == 0:
            sets[0].add(c)
            sets[1].add(c)
        elif role == 1:
            sets[0].add(c)
            sets[2].add(c)
        elif role == 2:
            sets[1].add(c)
            sets[2].add(c)
    return tuple((names[i], frozenset(sets[i])) for i in range(3))


def disjoint_halves_corruption(class_count: int = 8,
                               names: tuple[str, str] = ("synth0", "synth1"),
                               ) -> CorruptionMap:
    """Two backbones blind on interleaved halves (odd vs even class ids).

    The interleaving puts one blind and one clean class of each backbone in
    every fold, so voting beats both single branches fold by fold.
    """
    odd = frozenset(range(1, class_count + 1, 2))
    even = frozenset(range(2, class_count + 1, 2))
    return ((names[0], odd), (names[1], even))


def clean_corruption(n_backbones: int = 1, prefix: str = "synth") -> CorruptionMap:
    """n uncorrupted backbones."""
    return tuple((f"{prefix}{i}", frozenset()) for i in range(n_backbones))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic dataset; corruption_map=None selects the
    three-backbone pairwise-blind default."""

    class_count: int = 8
    height: int = 32
    width: int = 32
    channels: int = 16
    separation: float = 1.0
    noise_sigma: float = 0.25
    images_per_class: int = 6
    corruption_map: CorruptionMap | None = None

    def __post_init__(self):
        if self.class_count < 1 or self.class_count > 200:
            raise ValueError(f"class_count must be in [1, 200], got {self.class_count}")
        if self.height < 4 or self.width < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.height}x{self.width}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.separation <= 0:
            raise ValueError(f"separation must be positive, got {self.separation}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.images_per_class < 2:
            raise ValueError(f"images_per_class must be >= 2, got {self.images_per_class}")
        cmap = self.corruption_map
        if cmap is None:
            cmap = pairwise_blind_corruption(self.class_count)
        cmap = tuple((str(name), frozenset(int(c) for c in classes)) for name, classes in cmap)
        names = [name for name, _ in cmap]
        if not names or len(set(names)) != len(names):
            raise ValueError(f"backbone names must be unique and non-empty, got {names}")
        for name, classes in cmap:
            bad = [c for c in classes if c < 1 or c > self.class_count]
            if bad:
                raise ValueError(f"backbone {name!r}: corrupted classes {bad} out of range")
        object.__setattr__(self, "corruption_map", cmap)

    @property
    def backbones(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.corruption_map)

    def corrupted_classes(self, backbone: str) -> frozenset[int]:
        for name, classes in self.corruption_map:
            if name == backbone:
                return classes
        raise KeyError(f"no backbone {backbone!r} in spec")

    def to_dict(self) -> dict:
        return {
            "class_count": self.class_count,
            "height": self.height,
            "width": self.width,
            "channels": self.channels,
            "separation": self.separation,
            "noise_sigma": self.noise_sigma,
            "images_per_class": self.images_per_class,
            "corruption_map": {name: sorted(classes) for name, classes in self.corruption_map},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        cmap = doc.get("corruption_map")
        if cmap is not None:
            cmap = tuple((name, frozenset(classes)) for name, classes in cmap.items())
        keys = ("class_count", "height", "width", "channels", "separation",
                "noise_sigma", "images_per_class")
        kwargs = {k: doc[k] for k in keys if k in doc}
        return cls(corruption_map=cmap, **kwargs)


def class_centers(rng: np.random.Generator, n_centers: int, channels: int,
                  separation: float) -> np.ndarray:
    """(n_centers, channels) float64 center matrix, row 0 = background.

    Mutually orthogonal unit directions when the channel count allows it,
    otherwise random unit vectors kept only if reasonably spread out.
    """
    if channels >= n_centers:
        m = rng.normal(size=(channels, n_centers))
        q, r = np.linalg.qr(m)
        q = q * np.sign(np.diag(r))  # sign-canonical so the draw is reproducible
        centers = q.T
    else:
        best, best_cos = None, np.inf
        for _ in range(50):
            m = rng.normal(size=(n_centers, channels))
            m /= np.linalg.norm(m, axis=1, keepdims=True)
            cos = np.abs(m @ m.T)
            np.fill_diagonal(cos, 0.0)
            worst = cos.max()
            if worst < best_cos:
                best, best_cos = m, worst
        if best_cos > 0.9:
            raise ValueError(
                f"cannot place {n_centers} sufficiently separated centers in "
                f"{channels} channels (max |cos| {best_cos:.2f})")
        centers = best
    return separation * centers


def _blob_mask(rng: np.random.Generator, spec: SyntheticSpec, class_id: int) -> np.ndarray:
    h, w = spec.height, spec.width
    bh = int(rng.integers(h // 4, h // 2, endpoint=True))
    bw = int(rng.integers(w // 4, w // 2, endpoint=True))
    top = int(rng.integers(0, h - bh, endpoint=True))
    left = int(rng.integers(0, w - bw, endpoint=True))
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[top:top + bh, left:left + bw] = class_id
    return labels


def _backbone_features(rng: np.random.Generator, spec: SyntheticSpec,
                       labels: np.ndarray, centers: np.ndarray,
                       class_id: int, corrupted: bool) -> np.ndarray:
    noise = rng.normal(size=(spec.height, spec.width, spec.channels))
    feats = np.empty((spec.height, spec.width, spec.channels), dtype=np.float64)
    feats[:] = centers[0]
    fg = labels == class_id
    feats[fg] = centers[class_id]
    feats += spec.noise_sigma * noise
    if corrupted:
        feats[fg] = noise[fg]  # unit-scale noise, no class signal left
    return feats.astype(np.float32)


def gen_synthetic_manifest(spec: SyntheticSpec, seed: int, out_dir) -> Manifest:
    """Write masks, feature volumes, and manifest.json under out_dir."""
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for backbone in spec.backbones:
        (out / "fvols" / backbone).mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers = class_centers(rng, spec.class_count + 1, spec.channels, spec.separation)

    entries = []
    index = 0
    for class_id in range(1, spec.class_count + 1):
        for _ in range(spec.images_per_class):
            image_id = f"img_{index:05d}"
            index += 1
            labels = _blob_mask(rng, spec, class_id)
            mask_rel = f"masks/{image_id}.png"
            write_mask(DenseMask(labels), out / mask_rel)
            fvol_paths = {}
            for backbone, corrupted_set in spec.corruption_map:
                feats = _backbone_features(
                    rng, spec, labels, centers, class_id, class_id in corrupted_set)
                rel = f"fvols/{backbone}/{image_id}.fvl"
                write_fvol(FeatureVolume(feats), out / rel)
                fvol_paths[backbone] = rel
            entries.append(ImageEntry(image_id, mask_rel, (class_id,), fvol_paths))

    manifest = Manifest(
        class_count=spec.class_count,
        backbones=spec.backbones,
        images=tuple(entries),
        base_dir=out,
    )
    save_manifest(manifest, out / "manifest.json")
    return manifest
