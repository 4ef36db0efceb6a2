"""Command-line surface: train, eval, predict, sweep, gradcheck, graph-dump.

Every subcommand is a thin shell over the library; run configs are YAML
key-value trees (see ``example_config``) and all randomness flows from the
single config seed. Exit codes: 0 success, 1 verification failure,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import data as data_io
from . import graphs
from . import gradcheck as gc
from .model import ModelConfig, build_model, load_checkpoint, save_checkpoint
from .training import (
    NumericalError,
    TrainConfig,
    baseline_report,
    evaluate,
    train,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def example_config():
    return {
        "seed": 0,
        "dataset": "dataset.mgps",
        "output_dir": "runs/quickstart",
        "skeleton": "chain_8",
        "model": {
            "input_frames": 10,
            "output_frames": 10,
            "span": 2,
            "max_hop": 3,
            "strategy": "anchor",
            "anchor_count": None,
            "refine": True,
            "value_schedule": [3, 64, 32, 64, 3],
            "qk_schedule": [3, 64, 32, 16, 16, 3],
        },
        "train": {
            "epochs": 50,
            "batch_size": 32,
            "lr_initial": 0.01,
            "lr_decay_epochs": [20, 35, 45],
            "lr_decay_factor": 0.1,
            "clip_norm": 1.0,
        },
        "windows": {"stride": 1},
        "horizons": [2, 5, 10],
    }


def _require(config, key):
    if key not in config or config[key] is None:
        raise ConfigError(f"missing required config field {key!r}")
    return config[key]


def load_config(path):
    try:
        with open(path) as f:
            config = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config


def _build_from_config(config):
    seed = int(config.get("seed", 0))
    skeleton = data_io.skeleton_preset(_require(config, "skeleton"))
    m = dict(_require(config, "model"))
    try:
        model_config = ModelConfig(
            input_frames=int(_require(m, "input_frames")),
            output_frames=int(_require(m, "output_frames")),
            span=int(m.get("span", 2)),
            max_hop=int(m.get("max_hop", 3)),
            strategy=m.get("strategy", "anchor"),
            anchor_count=m.get("anchor_count"),
            refine=bool(m.get("refine", True)),
            value_schedule=tuple(m.get("value_schedule", (3, 64, 32, 64, 3))),
            qk_schedule=tuple(m.get("qk_schedule", (3, 64, 32, 16, 16, 3))),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    return skeleton, model_config


def _train_config(config):
    t = dict(config.get("train", {}))
    try:
        return TrainConfig(
            epochs=int(t.get("epochs", 50)),
            batch_size=int(t.get("batch_size", 32)),
            lr_initial=float(t.get("lr_initial", 0.01)),
            lr_decay_epochs=tuple(t.get("lr_decay_epochs", (20, 35, 45))),
            lr_decay_factor=float(t.get("lr_decay_factor", 0.1)),
            clip_norm=t.get("clip_norm", 1.0),
            seed=int(config.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc


def _load_windows(config, model_config, skeleton):
    path = _require(config, "dataset")
    if not os.path.exists(path):
        raise ConfigError(f"dataset: file not found: {path}")
    sequences = data_io.load_sequences(path)
    stride = int(config.get("windows", {}).get("stride", 1))
    windows = data_io.make_windows(
        sequences,
        model_config.input_frames,
        model_config.output_frames,
        stride=stride,
        skeleton=skeleton,
    )
    if len(windows) == 0:
        raise ConfigError(
            f"dataset: no windows of length "
            f"{model_config.input_frames + model_config.output_frames} in {path}"
        )
    if windows.inputs.shape[2] != skeleton.joint_count:
        raise ConfigError(
            f"dataset: joint count {windows.inputs.shape[2]} does not match "
            f"skeleton ({skeleton.joint_count})"
        )
    return windows


def _write_log(path, log):
    with open(path, "w") as f:
        for rec in log:
            f.write(json.dumps(
                {"epoch": rec.epoch, "mean_loss": rec.mean_loss, "lr": rec.lr}
            ) + "\n")


def _run_training(config, out_dir):
    skeleton, model_config = _build_from_config(config)
    train_config = _train_config(config)
    windows = _load_windows(config, model_config, skeleton)
    model = build_model(skeleton, model_config)
    log = train(model, windows, train_config)

    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(os.path.join(out_dir, "checkpoint.pckp"), model)
    _write_log(os.path.join(out_dir, "train_log.jsonl"), log)
    horizons = [int(h) for h in config.get("horizons", [model_config.output_frames])]
    report = evaluate(model, windows, horizons)
    with open(os.path.join(out_dir, "eval_report.txt"), "w") as f:
        f.write(report.format_table() + "\n")
    return model, log, report


def cmd_train(args):
    try:
        config = load_config(args.config)
        out_dir = config.get("output_dir", "runs/default")
        _run_training(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote checkpoint, train_log.jsonl, eval_report.txt to {out_dir}")
    return EXIT_OK


def cmd_eval(args):
    try:
        model = load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sequences = data_io.load_sequences(args.dataset)
    cfg = model.config
    windows = data_io.make_windows(
        sequences, cfg.input_frames, cfg.output_frames, skeleton=model.skeleton
    )
    if len(windows) == 0 or windows.inputs.shape[2] != model.joint_count:
        print("configuration error: dataset does not match checkpoint dims",
              file=sys.stderr)
        return EXIT_CONFIG
    horizons = [int(h) for h in args.horizons.split(",")]
    try:
        report = evaluate(model, windows, horizons)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    extra = None
    if args.baseline:
        extra = {"baseline": baseline_report(windows, horizons).horizons}
    table = report.format_table(extra_rows=extra)
    print(table)
    if args.out:
        payload = {"horizons": report.horizons}
        if extra:
            payload["baseline"] = extra["baseline"]
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2)
    return EXIT_OK


def cmd_predict(args):
    try:
        model = load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sequences = data_io.load_sequences(args.dataset)
    cfg = model.config
    outputs = []
    for seq in sequences:
        if len(seq) < cfg.input_frames:
            continue
        x = seq.frames[-cfg.input_frames:][None]
        pred = model.predict(x)[0]
        outputs.append(data_io.PoseSequence(frames=pred, rate=seq.rate,
                                            label=seq.label))
    data_io.save_sequences(args.out, outputs)
    print(f"wrote {len(outputs)} predicted sequences to {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    try:
        config = load_config(args.config)
        spans = [int(x) for x in args.spans.split(",")]
        hops = [int(x) for x in args.hops.split(",")]
        base_out = config.get("output_dir", "runs/sweep")
        horizon = int(args.horizon)
        rows = []
        for span in spans:
            for hop in hops:
                cell = {**config, "model": {**config["model"],
                                            "span": span, "max_hop": hop}}
                out_dir = os.path.join(base_out, f"L{span}D{hop}")
                model, log, _ = _run_training(cell, out_dir)
                windows = _load_windows(cell, model.config, model.skeleton)
                report = evaluate(model, windows, [horizon])
                rows.append((span, hop, report.horizons[horizon]))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"L  D  error@{horizon}")
    for span, hop, err in rows:
        print(f"{span}  {hop}  {err:.4f}")
    return EXIT_OK


def cmd_gradcheck(args):
    results = gc.run_suite()
    worst_failures = [r for r in results if not r.passed]
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<20} max relative error {r.max_relative_error:.3e}  {status}")
    if worst_failures:
        names = ", ".join(r.name for r in worst_failures)
        print(f"gradient check failed: {names}", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_graph_dump(args):
    try:
        skeleton = data_io.skeleton_preset(args.skeleton)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    partition = graphs.build_hop_partition(skeleton, args.max_hop)
    multigraph = graphs.build_multigraph(partition, args.frames, args.span)
    os.makedirs(args.out, exist_ok=True)
    paths = graphs.dump_multigraph(multigraph, args.out)
    print(f"wrote {len(paths)} operator files to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="posecast", description="Graph-convolutional pose forecasting"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a YAML run config")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--horizons", default="2,10,25")
    p.add_argument("--baseline", action="store_true",
                   help="include the copy-last-frame baseline row")
    p.add_argument("--out", default=None, help="machine-readable JSON copy")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast from the tail of each sequence")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="train one model per (L, D) cell")
    p.add_argument("config")
    p.add_argument("--spans", required=True, help="comma-separated L values")
    p.add_argument("--hops", required=True, help="comma-separated D values")
    p.add_argument("--horizon", default="10")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference verification suite")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("graph-dump", help="dump hop operators as text matrices")
    p.add_argument("skeleton")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--span", type=int, required=True)
    p.add_argument("--max-hop", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph_dump)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
