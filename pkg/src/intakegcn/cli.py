"""Command-line entry point.

Commands: ``synth`` (generate a labeled synthetic dataset), ``train``,
``predict``, ``eval`` and ``inspect-graph``. Every command accepts
``--config`` (a flat JSON document whose keys mirror the flags; flags win
on conflict), ``--seed`` and ``--out``. Failures exit nonzero after
printing one machine-readable JSON error line to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import metrics, pipeline
from .checkpoint import load_checkpoint
from .config import RunConfig, load_config_file, save_config, synth_config_from_dict
from .graph import (
    UNREACHABLE,
    build_topology,
    hop_distances,
    partition_adjacency,
    validate_topology,
)
from .synth import generate_sequence
from .train import (
    labels_path_for,
    load_sequence,
    predict_sequence,
    sequence_id,
    train_model,
)

log = logging.getLogger("intakegcn")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.handler(args)
    except Exception as exc:  # surface one parseable line, nonzero exit
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intakegcn",
        description="Eating/drinking gesture detection from skeleton keypoints.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    _shared_flags(p)
    p.add_argument("--count", type=int, default=20, help="number of sequences")
    p.add_argument("--fps", type=float)
    p.add_argument("--duration", type=float, help="seconds per sequence")
    p.add_argument("--eat-range", type=_int_pair, help="min,max eat events")
    p.add_argument("--drink-range", type=_int_pair, help="min,max drink events")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="train a model on keypoint/label files")
    _shared_flags(p)
    p.add_argument("--train-files", nargs="*", help="keypoint JSONL files")
    p.add_argument("--val-files", nargs="*")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--tcn-mode", choices=["basic", "dilated"])
    p.add_argument("--resume", help="checkpoint directory to continue from")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="write per-frame prediction CSVs")
    _shared_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("files", nargs="+", help="keypoint JSONL files")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("eval", help="segment-wise evaluation of predictions")
    _shared_flags(p)
    p.add_argument("--gt", nargs="+", required=True, help="label CSV files")
    p.add_argument("--pred", nargs="+", required=True, help="prediction CSV files")
    p.add_argument("--ks", type=_float_list, default=list(metrics.DEFAULT_THRESHOLDS))
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("inspect-graph", help="dump topology and partition info")
    _shared_flags(p)
    p.add_argument("--parts", type=_str_list, default=["face", "arm", "mouth", "hand"])
    p.set_defaults(handler=cmd_inspect_graph)
    return parser


def _shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory", default="out")


def _int_pair(text: str) -> tuple[int, int]:
    a, b = text.split(",")
    return int(a), int(b)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _str_list(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def _load_flat_config(args) -> dict:
    return load_config_file(args.config) if args.config else {}


def _run_config(args, flat: dict, **flag_overrides) -> RunConfig:
    known = set(RunConfig.__dataclass_fields__)
    data = {k: v for k, v in flat.items() if k in known}
    if args.seed is not None:
        data["seed"] = args.seed
    for key, value in flag_overrides.items():
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


def cmd_synth(args) -> int:
    flat = _load_flat_config(args)
    base = synth_config_from_dict(flat)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.fps is not None:
        updates["fps"] = args.fps
    if args.duration is not None:
        updates["duration_seconds"] = args.duration
    if args.eat_range is not None:
        updates["eat_events"] = args.eat_range
    if args.drink_range is not None:
        updates["drink_events"] = args.drink_range
    base = dataclasses.replace(base, **updates)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.count):
        cfg = dataclasses.replace(base, seed=base.seed + i)
        seq = generate_sequence(cfg)
        seq_id = f"seq_{i:03d}"
        kp_file = out / f"{seq_id}_keypoints.jsonl"
        label_file = out / f"{seq_id}_labels.csv"
        pipeline.save_keypoints(seq, kp_file)
        pipeline.save_labels(seq.labels, label_file)
        segments = metrics.frames_to_segments(seq.labels)
        entries.append(
            {
                "id": seq_id,
                "keypoints": kp_file.name,
                "labels": label_file.name,
                "frames": seq.frame_count,
                "fps": cfg.fps,
                "eat_segments": sum(1 for s in segments if s.class_id == 1),
                "drink_segments": sum(1 for s in segments if s.class_id == 2),
            }
        )
    manifest = {
        "generator": dataclasses.asdict(base),
        "count": args.count,
        "sequences": entries,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    log.info("wrote %d sequences to %s", args.count, out)
    return 0


def cmd_train(args) -> int:
    flat = _load_flat_config(args)
    run = _run_config(
        args,
        flat,
        train_files=args.train_files,
        val_files=args.val_files,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        tcn_mode=args.tcn_mode,
    )
    if not run.train_files:
        raise ValueError("no training files (use --train-files or the config)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(run, out / "run_config.json")

    resume_params = None
    if args.resume:
        resume_params, ckpt_config, _, _ = load_checkpoint(args.resume)
        log.info("resuming from %s", args.resume)
        topology = build_topology(run.parts)
        if ckpt_config.vertex_count != topology.node_count:
            raise ValueError(
                f"resume checkpoint has V={ckpt_config.vertex_count},"
                f" config parts give V={topology.node_count}"
            )
    result = train_model(run, out, initial_params=resume_params)
    log.info("final checkpoint: %s", result.final_checkpoint)
    if result.best_checkpoint:
        log.info(
            "best val F1 %.3f at epoch %d: %s",
            result.best_val_f1,
            result.best_epoch,
            result.best_checkpoint,
        )
    return 0


def cmd_predict(args) -> int:
    flat = _load_flat_config(args)
    run = _run_config(args, flat)
    params, config, topology, _ = load_checkpoint(args.checkpoint)
    adjacency = partition_adjacency(topology)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for kp_file in args.files:
        seq = load_sequence(kp_file, run, require_labels=False)
        if seq.frames.shape[1] != topology.node_count:
            raise ValueError(
                f"{kp_file}: checkpoint expects V={topology.node_count},"
                f" file has V={seq.frames.shape[1]}"
            )
        labels, probs = predict_sequence(
            seq, params, config, adjacency, run.window_seconds
        )
        dest = out / f"{sequence_id(kp_file)}_pred.csv"
        pipeline.save_predictions(labels, probs, dest)
        log.info("%s -> %s", kp_file, dest)
    return 0


def cmd_eval(args) -> int:
    gt_by_id = {sequence_id(p): Path(p) for p in args.gt}
    pred_by_id = {sequence_id(p): Path(p) for p in args.pred}
    if set(gt_by_id) != set(pred_by_id):
        missing = set(gt_by_id) ^ set(pred_by_id)
        raise ValueError(f"unpaired sequence ids: {sorted(missing)}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ks = tuple(args.ks)
    tables = []
    for seq_id in sorted(gt_by_id):
        pred_labels, _ = pipeline.load_predictions(pred_by_id[seq_id])
        gt_labels = pipeline.load_labels(gt_by_id[seq_id], pred_labels.shape[0])
        counts = metrics.evaluate_counts(gt_labels, pred_labels, ks=ks)
        tables.append(counts)
        report = metrics.counts_to_report(counts)
        (out / f"{seq_id}_report.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
    pooled = metrics.counts_to_report(metrics.merge_count_tables(tables))
    (out / "pooled_report.json").write_text(pooled.to_json() + "\n", encoding="utf-8")
    (out / "pooled_report.txt").write_text(pooled.to_text() + "\n", encoding="utf-8")
    print(pooled.to_text())
    return 0


def cmd_inspect_graph(args) -> int:
    topology = build_topology(args.parts)
    adjacency = partition_adjacency(topology)
    report = validate_topology(topology)
    distances = hop_distances(topology)
    doc = topology.to_dict()
    doc["hop_distances"] = [int(d) if d != UNREACHABLE else None for d in distances]
    doc["partition_row_sums"] = [
        [round(float(s), 6) for s in stack.sum(axis=1)] for stack in adjacency.stacks
    ]
    doc["valid"] = report.ok
    if not report.connected:
        doc["warning"] = "selected subgraph is disconnected"

    text = json.dumps(doc, indent=2)
    if args.out and args.out != "out":
        path = Path(args.out)
        if path.suffix:  # treat as a file, else a directory
            path.parent.mkdir(parents=True, exist_ok=True)
        else:
            path.mkdir(parents=True, exist_ok=True)
            path = path / "topology.json"
        path.write_text(text + "\n", encoding="utf-8")
        log.info("wrote %s", path)
    print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
