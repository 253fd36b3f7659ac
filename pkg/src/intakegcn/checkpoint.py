"""Checkpoint serialization: a JSON manifest plus one binary blob.

The manifest carries the format version, the model configuration, the
topology descriptor and a named tensor index (shape, offset, length into
the blob); the blob holds every tensor as little-endian float32 in sorted
name order. Values, Adam moments and batch-norm buffers are all included,
so resuming continues the optimizer state, and a SHA-256 of the blob
guards integrity. Loading is bit-exact at the serialized 32-bit precision.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .graph import SkeletonTopology, build_topology
from .model import BlockConfig, ModelConfig, ModelParams
from .optim import Param

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "params.bin"


def model_config_to_dict(config: ModelConfig) -> dict:
    data = asdict(config)
    data["dense_widths"] = list(config.dense_widths)
    return data


def model_config_from_dict(data: dict) -> ModelConfig:
    data = dict(data)
    blocks = [BlockConfig(**blk) for blk in data.pop("blocks")]
    data["dense_widths"] = tuple(data["dense_widths"])
    cfg = ModelConfig(blocks=blocks, **data)
    cfg.validate()
    return cfg


def save_checkpoint(
    path,
    params: ModelParams,
    config: ModelConfig,
    topology: SkeletonTopology,
    extra: dict | None = None,
) -> Path:
    """Write ``manifest.json`` and ``params.bin`` under ``path`` (a directory)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    chunks: list[bytes] = []
    index: list[dict] = []
    offset = 0

    def push(name: str, array: np.ndarray):
        nonlocal offset
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        index.append(
            {"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(raw)}
        )
        chunks.append(raw)
        offset += len(raw)

    step_counts = {}
    for name in sorted(params.params):
        p = params.params[name]
        push(name, p.value)
        if p.adam_m is not None:
            push(f"{name}#adam_m", p.adam_m)
            push(f"{name}#adam_v", p.adam_v)
        step_counts[name] = p.step_count
    for name in sorted(params.buffers):
        push(f"{name}#buffer", params.buffers[name])

    blob = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model_config_to_dict(config),
        "topology": topology.to_dict(),
        "tensors": index,
        "step_counts": step_counts,
        "frozen": sorted(params.frozen),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "extra": extra or {},
    }
    (path / BLOB_NAME).write_bytes(blob)
    (path / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig, SkeletonTopology, dict]:
    path = Path(path)
    manifest = json.loads((path / MANIFEST_NAME).read_text(encoding="utf-8"))
    if manifest["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest['format_version']}")
    blob = (path / BLOB_NAME).read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != manifest["blob_sha256"]:
        raise ValueError(f"{path}: parameter blob hash mismatch")

    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(entry["shape"])
        arrays[entry["name"]] = arr

    params = ModelParams()
    for name, value in arrays.items():
        if "#" in name:
            continue
        p = Param(name, value)
        if f"{name}#adam_m" in arrays:
            p.adam_m = arrays[f"{name}#adam_m"]
            p.adam_v = arrays[f"{name}#adam_v"]
        p.step_count = manifest["step_counts"].get(name, 0)
        params.params[name] = p
    for name, value in arrays.items():
        if name.endswith("#buffer"):
            params.buffers[name[: -len("#buffer")]] = value
    params.frozen = set(manifest.get("frozen", []))

    config = model_config_from_dict(manifest["model_config"])
    topo_info = manifest["topology"]
    topology = build_topology(topo_info["parts"], root_source=topo_info["root_source"])
    return params, config, topology, manifest.get("extra", {})
