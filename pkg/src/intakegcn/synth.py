"""Deterministic synthetic skeleton sequences with eat/drink annotations.

A fixed sitting pose in a 140x140 frame is jittered per frame; during an
"eat" event one hand's five keypoints travel along a smooth ease-in/out
path to the mouth, dwell there briefly and return, while a "drink" event
approaches more slowly, holds at the mouth much longer with a raised elbow
and returns. Classes therefore overlap heavily in instantaneous pose and
differ mainly in temporal structure, which is what the temporal layers of
the network are supposed to pick up. Keypoint dropout simulates the
low-confidence zeroing of the real extraction stage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pipeline import KEYPOINT_COUNT, SkeletonSequence
from .rng import RngStream

FRAME_SIZE = 140.0

# Canonical node order of graph.py: face 0-4, arms 5-8, mouth 9-12,
# left hand 13-17, right hand 18-22. Coordinates in pixels, y down.
BASE_POSE = np.array(
    [
        (70, 40), (66, 36), (74, 36), (61, 39), (79, 39),  # face
        (52, 68), (88, 68), (44, 96), (96, 96),  # shoulders, elbows
        (74, 50), (66, 50), (70, 48), (70, 52),  # mouth ring
        (50, 118), (53, 121), (55, 123), (48, 122), (47, 125),  # left hand
        (90, 118), (87, 121), (85, 123), (92, 122), (93, 125),  # right hand
    ],
    dtype=np.float64,
)

LOWER_LIP = 12
LEFT_HAND = (13, 14, 15, 16, 17)
RIGHT_HAND = (18, 19, 20, 21, 22)
LEFT_ELBOW, RIGHT_ELBOW = 7, 8
_TIP_TARGET = np.array([70.0, 54.0])  # just below the lower lip
_ELBOW_FOLLOW = 0.35
_DRINK_ELBOW_RAISE = np.array([0.0, -14.0])
_DRINK_HAND_TILT = np.array([0.0, -4.0])


@dataclass
class SynthConfig:
    seed: int = 0
    fps: float = 24.0
    duration_seconds: float = 60.0
    eat_events: tuple[int, int] = (6, 9)
    drink_events: tuple[int, int] = (1, 3)
    eat_duration_frames: tuple[int, int] = (24, 60)
    drink_duration_frames: tuple[int, int] = (56, 100)
    jitter_px: float = 1.0
    keypoint_dropout: float = 0.02
    min_gap_frames: int = 12

    def validate(self) -> None:
        if self.fps <= 0 or self.duration_seconds <= 0:
            raise ValueError("fps and duration must be positive")
        if not 0.0 <= self.keypoint_dropout < 1.0:
            raise ValueError("keypoint_dropout must be in [0, 1)")
        for lo, hi in (
            self.eat_events,
            self.drink_events,
            self.eat_duration_frames,
            self.drink_duration_frames,
        ):
            if lo < 0 or hi < lo:
                raise ValueError("ranges must satisfy 0 <= lo <= hi")
        if self.min_gap_frames < 1:
            raise ValueError("min_gap_frames must be >= 1")


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return 3.0 * u**2 - 2.0 * u**3


def _event_profile(kind: int, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame hand progress (0 at rest, 1 at mouth) and hold weight."""
    t = np.arange(length, dtype=np.float64)
    if kind == 1:  # eat: quick transit, moderate dwell
        up, down = max(2, round(0.2 * length)), max(2, round(0.2 * length))
    else:  # drink: slower approach, long hold
        up, down = max(3, round(0.3 * length)), max(2, round(0.25 * length))
    hold_start, hold_end = up, length - down
    progress = np.ones(length)
    progress[:up] = _smoothstep(t[:up] / up)
    progress[hold_end:] = _smoothstep((length - 1 - t[hold_end:]) / down)
    hold = np.zeros(length)
    hold[hold_start:hold_end] = 1.0
    return progress, hold


def _schedule_events(config: SynthConfig, stream: RngStream, t_total: int):
    """Non-overlapping (class, start, length) events separated by at least
    ``min_gap_frames``; raises when the requested load cannot fit."""
    n_eat = int(stream.integers(config.eat_events[0], config.eat_events[1] + 1))
    n_drink = int(stream.integers(config.drink_events[0], config.drink_events[1] + 1))
    kinds = [1] * n_eat + [2] * n_drink
    order = stream.permutation(len(kinds))
    kinds = [kinds[i] for i in order]

    lengths = []
    for kind in kinds:
        lo, hi = (
            config.eat_duration_frames if kind == 1 else config.drink_duration_frames
        )
        lengths.append(int(stream.integers(lo, hi + 1)))

    n = len(kinds)
    total = sum(lengths)
    inner_min = config.min_gap_frames * max(n - 1, 0)
    slack = t_total - total - inner_min
    if n > 0 and slack < 0:
        raise ValueError(
            f"infeasible schedule: {n} gestures of {total} frames plus gaps"
            f" exceed {t_total} frames"
        )

    weights = stream.uniform(0.0, 1.0, size=n + 1)
    extras = np.floor(weights / weights.sum() * slack).astype(int) if n > 0 else []
    events = []
    cursor = 0
    for i, (kind, length) in enumerate(zip(kinds, lengths)):
        cursor += int(extras[i]) + (config.min_gap_frames if i > 0 else 0)
        events.append((kind, cursor, length))
        cursor += length
    return events


def generate_sequence(config: SynthConfig) -> SkeletonSequence:
    """One labeled skeleton sequence in pixel coordinates (not normalized)."""
    config.validate()
    root = RngStream(config.seed).child("synth")
    t_total = int(round(config.fps * config.duration_seconds))

    events = _schedule_events(config, root.child("schedule"), t_total)
    frames = np.zeros((t_total, KEYPOINT_COUNT, 3))
    frames[:, :, :2] = BASE_POSE[None, :, :]
    labels = np.zeros(t_total, dtype=np.int64)

    hand_pick = root.child("hands")
    for kind, start, length in events:
        labels[start : start + length] = kind
        use_left = bool(hand_pick.integers(0, 2))
        hand = LEFT_HAND if use_left else RIGHT_HAND
        elbow = LEFT_ELBOW if use_left else RIGHT_ELBOW
        tip = hand[-1]
        delta = _TIP_TARGET - BASE_POSE[tip]

        progress, hold = _event_profile(kind, length)
        span = slice(start, start + length)
        motion = progress[:, None] * delta[None, :]
        for node in hand:
            frames[span, node, :2] += motion
        frames[span, elbow, :2] += _ELBOW_FOLLOW * motion
        if kind == 2:
            frames[span, elbow, :2] += hold[:, None] * _DRINK_ELBOW_RAISE
            for node in hand:
                frames[span, node, :2] += hold[:, None] * _DRINK_HAND_TILT

    frames[:, :, :2] += root.child("jitter").normal(
        config.jitter_px, size=(t_total, KEYPOINT_COUNT, 2)
    )
    frames[:, :, 2] = root.child("confidence").uniform(
        0.75, 0.99, size=(t_total, KEYPOINT_COUNT)
    )
    if config.keypoint_dropout > 0:
        dropped = ~root.child("kp_dropout").keep_mask(
            config.keypoint_dropout, (t_total, KEYPOINT_COUNT)
        )
        frames[dropped] = 0.0

    return SkeletonSequence(
        frames=frames,
        fps=config.fps,
        source_id=f"synth{config.seed:04d}",
        labels=labels,
    )


def hand_to_mouth_distance(seq: SkeletonSequence) -> np.ndarray:
    """Per-frame distance from the nearer index fingertip to the lower lip,
    ignoring zeroed (dropped) keypoints; NaN when nothing is measurable."""
    lip = seq.frames[:, LOWER_LIP, :2]
    lip_ok = seq.frames[:, LOWER_LIP, 2] > 0
    out = np.full(seq.frame_count, np.nan)
    for tip in (LEFT_HAND[-1], RIGHT_HAND[-1]):
        ok = lip_ok & (seq.frames[:, tip, 2] > 0)
        d = np.linalg.norm(seq.frames[:, tip, :2] - lip, axis=1)
        out[ok] = np.fmin(out[ok], d[ok])
    return out
