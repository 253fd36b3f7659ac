"""Run configuration: one flat JSON document mirrored by CLI flags.

Defaults reproduce the published training protocol where it is stated
(Adam at lr 5e-4, 50 epochs, batch 64, 6 s windows, all four body parts);
everything the protocol leaves open (stride, threshold, smoothing weights,
kernel sizes) is configurable here with the library defaults.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .model import ModelConfig, default_config, make_blocks
from .synth import SynthConfig


@dataclass
class RunConfig:
    parts: list[str] = field(default_factory=lambda: ["face", "arm", "mouth", "hand"])
    confidence_threshold: float = 0.3
    frame_width: float = 140.0
    frame_height: float = 140.0
    fps: float = 24.0
    window_seconds: float = 6.0
    train_stride_fraction: float = 0.5

    tcn_mode: str = "dilated"
    temporal_kernel: int | None = None  # None -> 3 dilated / 9 basic
    channels: list[int] | None = None  # None -> the full 10-block table
    dilations: list[int] | None = None
    dropouts: list[float] | None = None
    bilstm_hidden: int = 256
    dense_widths: list[int] = field(default_factory=lambda: [128, 128])
    smoothing_lambda: float = 0.15
    smoothing_tau: float = 4.0
    learn_edge_importance: bool = True

    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 64
    val_every: int = 1
    seed: int = 0

    train_files: list[str] = field(default_factory=list)
    val_files: list[str] = field(default_factory=list)
    test_files: list[str] = field(default_factory=list)

    def model_config(self, vertex_count: int) -> ModelConfig:
        common = dict(
            vertex_count=vertex_count,
            bilstm_hidden=self.bilstm_hidden,
            dense_widths=tuple(self.dense_widths),
            smoothing_lambda=self.smoothing_lambda,
            smoothing_tau=self.smoothing_tau,
            learn_edge_importance=self.learn_edge_importance,
        )
        if self.channels is None:
            return default_config(
                tcn_mode=self.tcn_mode,
                temporal_kernel=self.temporal_kernel,
                **common,
            )
        kernel = self.temporal_kernel
        if kernel is None:
            kernel = 3 if self.tcn_mode == "dilated" else 9
        if self.tcn_mode == "basic":
            dilations = [1] * len(self.channels)
        elif self.dilations is not None:
            dilations = list(self.dilations)
        else:
            raise ValueError("custom channels in dilated mode need explicit dilations")
        dropouts = self.dropouts if self.dropouts is not None else [0.15] * len(self.channels)
        cfg = ModelConfig(
            blocks=make_blocks(self.channels, dilations, dropouts, kernel),
            tcn_mode=self.tcn_mode,
            **common,
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return data


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def synth_config_from_dict(data: dict) -> SynthConfig:
    """Build generator settings from the flat config keys prefixed 'synth_'."""
    kwargs = {}
    for key, value in data.items():
        if not key.startswith("synth_"):
            continue
        name = key[len("synth_") :]
        if name not in SynthConfig.__dataclass_fields__:
            raise ValueError(f"unknown synth config key: {key}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return SynthConfig(**kwargs)
