"""Skeleton-based eating/drinking gesture detection.

A numpy library implementing the full pipeline: custom hand-mouth-face
skeleton graph, dilated spatial-temporal graph convolution blocks with a
BiLSTM head, sliding-window training and inference on keypoint time
series, and segment-wise IoU/F1 evaluation. See the command-line entry
point in :mod:`intakegcn.cli` for end-to-end runs.
"""
from .config import RunConfig
from .graph import (
    PartitionedAdjacency,
    SkeletonTopology,
    build_topology,
    hop_distances,
    partition_adjacency,
    validate_topology,
)
from .metrics import (
    EvalCounts,
    EvalReport,
    GestureSegment,
    evaluate,
    f1_from_counts,
    frames_to_segments,
    iou,
    match_segments,
)
from .model import (
    BlockConfig,
    ModelConfig,
    ModelParams,
    compute_loss,
    default_config,
    init_params,
    model_forward,
    predict_frames,
    stgcn_block_forward,
    train_step,
)
from .pipeline import (
    SkeletonSequence,
    WindowBatch,
    load_keypoints,
    load_labels,
    make_windows,
    normalize_coordinates,
    stitch_predictions,
)
from .rng import RngStream
from .synth import SynthConfig, generate_sequence

__version__ = "0.1.0"

__all__ = [
    "BlockConfig",
    "EvalCounts",
    "EvalReport",
    "GestureSegment",
    "ModelConfig",
    "ModelParams",
    "PartitionedAdjacency",
    "RngStream",
    "RunConfig",
    "SkeletonSequence",
    "SkeletonTopology",
    "SynthConfig",
    "WindowBatch",
    "build_topology",
    "compute_loss",
    "default_config",
    "evaluate",
    "f1_from_counts",
    "frames_to_segments",
    "generate_sequence",
    "hop_distances",
    "init_params",
    "iou",
    "load_keypoints",
    "load_labels",
    "make_windows",
    "match_segments",
    "model_forward",
    "normalize_coordinates",
    "partition_adjacency",
    "predict_frames",
    "stgcn_block_forward",
    "stitch_predictions",
    "train_step",
    "validate_topology",
]
