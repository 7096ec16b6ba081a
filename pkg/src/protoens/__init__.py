"""Prototype-based few-shot segmentation with backbone ensembling.

A parameter-free metric-learning head (masked average pooling to class
prototypes, per-pixel cosine-softmax classification), two ways to combine
several backbones (independent voting and feature-volume fusion), and a
seeded episodic harness reporting per-class IoU and fold mIoU.
"""

from .ensemble import (
    BackboneBranch,
    VotingConfig,
    combine_probability_maps,
    combine_score_maps,
    fuse,
    predict_ensemble,
    vote,
)
from .episodes import (
    Episode,
    EpisodePlan,
    FoldSpec,
    RunConfig,
    build_folds,
    load_episode,
    plan_episodes,
    run_evaluation,
    run_repeated,
    sample_episode,
)
from .errors import (
    DatasetTooSmallError,
    EmptyClassError,
    EpisodeInconsistencyError,
    EvaluationError,
    FvolFormatError,
    InvalidConfigError,
    ManifestError,
    ShapeMismatchError,
    UnsupportedFormatError,
)
from .fvolio import read_fvol, read_mask, write_fvol, write_mask
from .manifest import (
    ImageEntry,
    Manifest,
    load_manifest,
    load_report,
    save_manifest,
    validate_manifest,
    write_report,
)
from .metrics import (
    ConfusionCounts,
    FoldReport,
    accumulate,
    format_improvement,
    iou,
    miou,
    relative_improvement,
)
from .prototypes import (
    ALPHA_DEFAULT,
    ALPHA_PANET,
    BACKGROUND_LABEL,
    Prototype,
    PrototypeSet,
    background_prototype,
    build_prototypes,
    decode_class_mask,
    group_supports,
    masked_average_pool,
    predict_mask,
    predict_probability_map,
    score_map,
)
from .synthetic import (
    SyntheticSpec,
    clean_corruption,
    disjoint_halves_corruption,
    gen_synthetic_manifest,
    pairwise_blind_corruption,
)
from .tensor import (
    IGNORE_LABEL,
    DenseMask,
    FeatureVolume,
    ProbMap,
    argmax_decode,
    bilinear_resize,
    channel_concat,
    cosine_distance,
    cosine_distance_map,
    softmax_map,
    softmax_scores,
)

__version__ = "0.1.0"
