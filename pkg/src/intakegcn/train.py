"""Training orchestration: datasets to checkpoints.

Everything here is seed-driven through named RNG substreams, so two runs
with the same configuration produce byte-identical checkpoints on the same
platform.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, model, pipeline
from .checkpoint import save_checkpoint
from .config import RunConfig
from .graph import build_topology, partition_adjacency
from .rng import RngStream

log = logging.getLogger(__name__)


def labels_path_for(keypoints_path) -> Path:
    """Label CSV that pairs with a keypoint file: <id>_labels.csv."""
    path = Path(keypoints_path)
    return path.with_name(f"{sequence_id(path)}_labels.csv")


def sequence_id(path) -> str:
    """Sequence id = filename stem minus a recognized role suffix."""
    stem = Path(path).stem
    for suffix in ("_keypoints", "_labels", "_pred"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def load_sequence(
    keypoints_path,
    run: RunConfig,
    require_labels: bool = True,
) -> pipeline.SkeletonSequence:
    """Load, threshold, attach labels and normalize one sequence."""
    seq = pipeline.load_keypoints(
        keypoints_path, confidence_threshold=run.confidence_threshold, fps=run.fps
    )
    seq.source_id = sequence_id(keypoints_path)
    label_file = labels_path_for(keypoints_path)
    if label_file.exists():
        seq.labels = pipeline.load_labels(label_file, seq.frame_count)
    elif require_labels:
        raise FileNotFoundError(f"no label file for {keypoints_path} ({label_file})")
    seq, oob = pipeline.normalize_coordinates(seq, run.frame_width, run.frame_height)
    if oob:
        log.warning("%s: %d coordinates outside the frame", seq.source_id, oob)
    return seq


def stack_windows(sequences, run: RunConfig, mode: str) -> pipeline.WindowBatch:
    batches = [
        pipeline.make_windows(
            seq, run.window_seconds, run.train_stride_fraction, mode=mode
        )
        for seq in sequences
    ]
    return pipeline.WindowBatch(
        windows=np.concatenate([b.windows for b in batches]),
        labels=np.concatenate([b.labels for b in batches]),
        valid_mask=np.concatenate([b.valid_mask for b in batches]),
        origins=[o for b in batches for o in b.origins],
    )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_ce: float
    train_smoothing: float
    val_loss: float | None = None
    val_f1: float | None = None


@dataclass
class TrainResult:
    history: list[EpochStats] = field(default_factory=list)
    best_val_f1: float | None = None
    best_epoch: int | None = None
    final_checkpoint: Path | None = None
    best_checkpoint: Path | None = None


def predict_sequence(
    seq: pipeline.SkeletonSequence,
    params: model.ModelParams,
    config: model.ModelConfig,
    adjacency,
    window_seconds: float,
    chunk_size: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Frame labels and stitched probabilities for one full sequence."""
    batch = pipeline.make_windows(seq, window_seconds, mode="infer")
    probs = model.predict_frames(
        batch.windows, params, config, adjacency, chunk_size=chunk_size
    )
    labels = pipeline.stitch_predictions(probs, batch, seq.frame_count)
    full_probs = pipeline.stitch_probabilities(probs, batch, seq.frame_count)
    return labels, full_probs


def segment_f1(
    sequences,
    params,
    config,
    adjacency,
    window_seconds: float,
    k: float = 0.5,
) -> float:
    """Micro-averaged segment F1 at threshold k over whole sequences."""
    tables = []
    for seq in sequences:
        pred, _ = predict_sequence(seq, params, config, adjacency, window_seconds)
        tables.append(metrics.evaluate_counts(seq.labels, pred, ks=(k,)))
    pooled = metrics.merge_count_tables(tables)
    c = pooled["overall"][k]
    return metrics.f1_from_counts(c.tp, c.fp, c.fn)[2]


def train_model(
    run: RunConfig,
    out_dir,
    train_seqs=None,
    val_seqs=None,
    initial_params: model.ModelParams | None = None,
) -> TrainResult:
    """Train per the run configuration, saving final and best-val checkpoints.

    Sequences may be passed directly (already normalized) or loaded from
    the file lists in the config. ``initial_params`` continues from a
    loaded checkpoint instead of a fresh initialization.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = RngStream(run.seed)

    if train_seqs is None:
        train_seqs = [load_sequence(p, run) for p in run.train_files]
    if val_seqs is None:
        val_seqs = [load_sequence(p, run) for p in run.val_files]
    if not train_seqs:
        raise ValueError("no training sequences")

    topology = build_topology(run.parts)
    adjacency = partition_adjacency(topology)
    config = run.model_config(topology.node_count)
    params = initial_params if initial_params is not None else model.init_params(config, rng)

    batch = stack_windows(train_seqs, run, mode="train")
    n_windows = batch.windows.shape[0]
    log.info(
        "training on %d windows of %d frames (%d sequences)",
        n_windows,
        batch.window_length,
        len(train_seqs),
    )

    result = TrainResult()
    metrics_file = out_dir / "metrics.jsonl"
    best_f1 = -1.0
    global_step = 0
    with open(metrics_file, "w", encoding="utf-8") as mf:
        for epoch in range(run.epochs):
            order = rng.child("shuffle", epoch).permutation(n_windows)
            losses = []
            for start in range(0, n_windows, run.batch_size):
                idx = order[start : start + run.batch_size]
                record = model.train_step(
                    params,
                    (batch.windows[idx], batch.labels[idx], batch.valid_mask[idx]),
                    config,
                    adjacency,
                    rng.child("step", global_step),
                    lr=run.lr,
                    beta1=run.beta1,
                    beta2=run.beta2,
                    eps=run.adam_eps,
                )
                losses.append(record)
                global_step += 1

            stats = EpochStats(
                epoch=epoch,
                train_loss=float(np.mean([r.total for r in losses])),
                train_ce=float(np.mean([r.ce for r in losses])),
                train_smoothing=float(np.mean([r.smoothing for r in losses])),
            )
            if val_seqs and (epoch + 1) % run.val_every == 0:
                stats.val_loss = _validation_loss(val_seqs, params, config, adjacency, run)
                stats.val_f1 = segment_f1(
                    val_seqs, params, config, adjacency, run.window_seconds
                )
                if stats.val_f1 > best_f1:
                    best_f1 = stats.val_f1
                    result.best_val_f1 = stats.val_f1
                    result.best_epoch = epoch
                    result.best_checkpoint = save_checkpoint(
                        out_dir / "checkpoint-best",
                        params,
                        config,
                        topology,
                        extra={"epoch": epoch, "val_f1": stats.val_f1},
                    )
            result.history.append(stats)
            mf.write(json.dumps(stats.__dict__) + "\n")
            mf.flush()
            log.info(
                "epoch %d: loss %.4f (ce %.4f, smooth %.4f)%s",
                epoch,
                stats.train_loss,
                stats.train_ce,
                stats.train_smoothing,
                f" val_f1 {stats.val_f1:.3f}" if stats.val_f1 is not None else "",
            )

    result.final_checkpoint = save_checkpoint(
        out_dir / "checkpoint-final",
        params,
        config,
        topology,
        extra={"epochs": run.epochs},
    )
    return result


def _validation_loss(val_seqs, params, config, adjacency, run: RunConfig) -> float:
    batch = stack_windows(val_seqs, run, mode="infer")
    n = batch.windows.shape[0]
    total_weighted = 0.0
    for start in range(0, n, run.batch_size):
        stop = min(start + run.batch_size, n)
        logits, _ = model.model_forward(
            batch.windows[start:stop], params, config, adjacency, mode="infer"
        )
        total, _, _ = model.compute_loss(
            logits, batch.labels[start:stop], batch.valid_mask[start:stop], config
        )
        total_weighted += float(total) * (stop - start)
    return total_weighted / n
