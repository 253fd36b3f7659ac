"""Sequence ingestion and windowing.

File formats:
  * keypoints: JSON Lines, one frame per line,
    ``{"frame": <int>, "kp": [[x, y, confidence] * 23]}`` with keypoints in
    the canonical node order of :mod:`intakegcn.graph`;
  * labels: CSV with header ``frame,label``, labels 0 (none) / 1 (eat) /
    2 (drink); unlisted frames are background;
  * predictions: CSV with header ``frame,label,p_none,p_eat,p_drink``.

Sequences are sliced into fixed-length windows for the network; sliding
overlapped windows for training, disjoint tiled windows (tail zero-padded
and masked) for inference, which stitch back into a full-length frame
timeline.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

CLASS_NAMES = ("none", "eat", "drink")
KEYPOINT_COUNT = 23


@dataclass
class SkeletonSequence:
    """Per-frame keypoint triples (x, y, confidence) with optional labels."""

    frames: np.ndarray  # (T, 23, 3) float64
    fps: float
    source_id: str
    labels: np.ndarray | None = None  # (T,) int, values in {0, 1, 2}
    normalized: bool = False

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]


@dataclass
class WindowBatch:
    windows: np.ndarray  # (N, T_win, V, 3)
    labels: np.ndarray  # (N, T_win) int
    valid_mask: np.ndarray  # (N, T_win) bool, False on zero-padded tails
    origins: list[tuple[str, int]]  # (source_id, start frame)

    @property
    def window_length(self) -> int:
        return self.windows.shape[1]


def load_keypoints(
    path, confidence_threshold: float = 0.3, fps: float = 24.0
) -> SkeletonSequence:
    """Read a JSONL keypoint file into a dense frame array.

    Keypoints with confidence below the threshold are zeroed in all three
    channels; frame indices may arrive unordered and with gaps, which are
    filled with all-zero frames.
    """
    path = Path(path)
    per_frame: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                frame = int(record["frame"])
                kp = np.asarray(record["kp"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed line {lineno}: {exc}") from exc
            if kp.shape != (KEYPOINT_COUNT, 3):
                raise ValueError(
                    f"{path}: frame {frame} has keypoint array {kp.shape},"
                    f" expected ({KEYPOINT_COUNT}, 3)"
                )
            if frame in per_frame:
                raise ValueError(f"{path}: duplicate frame {frame} at line {lineno}")
            per_frame[frame] = kp
    if not per_frame:
        raise ValueError(f"{path}: no frames")

    t_total = max(per_frame) + 1
    frames = np.zeros((t_total, KEYPOINT_COUNT, 3))
    for idx, kp in per_frame.items():
        frames[idx] = kp
    low = frames[:, :, 2] < confidence_threshold
    frames[low] = 0.0
    return SkeletonSequence(frames=frames, fps=fps, source_id=path.stem)


def save_keypoints(seq: SkeletonSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx in range(seq.frame_count):
            kp = [[float(v) for v in point] for point in seq.frames[idx]]
            fh.write(json.dumps({"frame": idx, "kp": kp}) + "\n")


def load_labels(path, t_total: int) -> np.ndarray:
    """Read the CSV label file into a dense array of length ``t_total``."""
    labels = np.zeros(t_total, dtype=np.int64)
    seen: set[int] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for rowno, row in enumerate(reader, start=1):
            if not row or (rowno == 1 and row[0].strip() == "frame"):
                continue
            try:
                frame, label = int(row[0]), int(row[1])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}: bad row {rowno}: {row!r}") from exc
            if label not in (0, 1, 2):
                raise ValueError(f"{path}: row {rowno}: label {label} not in 0/1/2")
            if frame < 0 or frame >= t_total:
                raise ValueError(
                    f"{path}: row {rowno}: frame {frame} outside [0, {t_total})"
                )
            if frame in seen:
                raise ValueError(f"{path}: row {rowno}: duplicate frame {frame}")
            seen.add(frame)
            labels[frame] = label
    return labels


def save_labels(labels: np.ndarray, path) -> None:
    """Write only the nonzero frames; background is implicit."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "label"])
        for frame in np.nonzero(labels)[0]:
            writer.writerow([int(frame), int(labels[frame])])


def normalize_coordinates(
    seq: SkeletonSequence, frame_width: float, frame_height: float
) -> tuple[SkeletonSequence, int]:
    """Scale pixel coordinates into [0, 1] by the frame dimensions.

    Zeroed keypoints stay exactly (0, 0, 0) and confidences are untouched.
    Returns the normalized sequence plus the number of coordinates that
    fell outside [0, 1.05 * dimension] before scaling (a data-quality
    warning, not an error). Double application is refused.
    """
    if frame_width <= 0 or frame_height <= 0:
        raise ValueError("frame dimensions must be positive")
    if seq.normalized:
        raise ValueError(f"{seq.source_id}: sequence is already normalized")

    oob = int(
        (seq.frames[:, :, 0] > 1.05 * frame_width).sum()
        + (seq.frames[:, :, 1] > 1.05 * frame_height).sum()
        + (seq.frames[:, :, :2] < 0).sum()
    )
    frames = seq.frames.copy()
    frames[:, :, 0] /= frame_width
    frames[:, :, 1] /= frame_height
    return replace(seq, frames=frames, normalized=True), oob


def window_length(fps: float, window_seconds: float) -> int:
    return int(round(fps * window_seconds))


def make_windows(
    seq: SkeletonSequence,
    window_seconds: float = 6.0,
    train_stride_fraction: float = 0.5,
    mode: str = "train",
) -> WindowBatch:
    """Slice a sequence into model windows.

    Train mode slides overlapping full windows (stride = window length *
    ``train_stride_fraction``); a sequence shorter than one window yields a
    single zero-padded window. Infer mode tiles disjoint windows covering
    every frame exactly once, zero-padding and masking the final partial
    window.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be > 0")
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    t_total = seq.frame_count
    if t_total < 2:
        raise ValueError(f"{seq.source_id}: sequence too short ({t_total} frames)")

    t_win = window_length(seq.fps, window_seconds)
    labels = seq.labels if seq.labels is not None else np.zeros(t_total, dtype=np.int64)

    if mode == "train":
        stride = max(1, int(round(t_win * train_stride_fraction)))
        starts = list(range(0, max(t_total - t_win, 0) + 1, stride))
    else:
        starts = list(range(0, t_total, t_win))

    n = len(starts)
    windows = np.zeros((n, t_win, KEYPOINT_COUNT, 3))
    win_labels = np.zeros((n, t_win), dtype=np.int64)
    valid = np.zeros((n, t_win), dtype=bool)
    origins = []
    for i, start in enumerate(starts):
        stop = min(start + t_win, t_total)
        span = stop - start
        windows[i, :span] = seq.frames[start:stop]
        win_labels[i, :span] = labels[start:stop]
        valid[i, :span] = True
        origins.append((seq.source_id, start))
    return WindowBatch(windows, win_labels, valid, origins)


def stitch_predictions(
    probabilities: np.ndarray,
    batch: WindowBatch,
    t_total: int,
) -> np.ndarray:
    """Reassemble tiled window probabilities into one frame-label timeline.

    Expects the disjoint tiling produced by infer-mode ``make_windows``:
    each frame is covered by exactly one window, padded frames are dropped,
    and argmax ties resolve toward the lower class index.
    """
    if probabilities.shape[:2] != batch.windows.shape[:2]:
        raise ValueError("probabilities do not match the window batch")
    out = np.full(t_total, -1, dtype=np.int64)
    for i, (_, start) in enumerate(batch.origins):
        span = int(batch.valid_mask[i].sum())
        frame_labels = np.argmax(probabilities[i, :span], axis=-1)
        segment = out[start : start + span]
        if segment.shape[0] != span or np.any(segment >= 0):
            raise ValueError("windows do not tile the sequence disjointly")
        out[start : start + span] = frame_labels
    if np.any(out < 0):
        missing = int(np.argmax(out < 0))
        raise ValueError(f"frame {missing} not covered by any window")
    return out


def stitch_probabilities(
    probabilities: np.ndarray, batch: WindowBatch, t_total: int
) -> np.ndarray:
    """Like stitch_predictions but returns the (T, C) probability rows."""
    c = probabilities.shape[2]
    out = np.full((t_total, c), np.nan)
    for i, (_, start) in enumerate(batch.origins):
        span = int(batch.valid_mask[i].sum())
        out[start : start + span] = probabilities[i, :span]
    if np.any(np.isnan(out)):
        raise ValueError("windows do not cover the sequence")
    return out


def save_predictions(labels: np.ndarray, probabilities: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "label", "p_none", "p_eat", "p_drink"])
        for frame in range(labels.shape[0]):
            row = [frame, int(labels[frame])]
            row += [f"{p:.6f}" for p in probabilities[frame]]
            writer.writerow(row)


def load_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    frames, labels, probs = [], [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            frames.append(int(row["frame"]))
            labels.append(int(row["label"]))
            probs.append([float(row["p_none"]), float(row["p_eat"]), float(row["p_drink"])])
    order = np.argsort(frames)
    return np.asarray(labels, dtype=np.int64)[order], np.asarray(probs)[order]
