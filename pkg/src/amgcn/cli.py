"""Command-line interface.

Subcommands: generate, train, eval, gradcheck, knn-graph. Exit codes:
0 success, 1 unexpected error, 2 usage error, 3 malformed dataset,
4 invalid configuration, 5 training divergence. The environment variable
AMGCN_SEED is the fallback seed when neither the --seed flag nor the
config file provides one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import checkpoint as ckpt
from . import reporting
from .data import DatasetFormatError, generate_case1, generate_case2, load_dataset, make_split, save_dataset, with_split
from .graphs import SimilarityMetric, build_knn_graph
from .metrics import MetricsReport
from .model import full_forward
from .training import (
    TrainConfig,
    TrainingDiverged,
    finite_difference_check,
    prepare_inputs,
    train,
)

CHECKPOINT_NAME = "checkpoint.npz"


class ConfigError(ValueError):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get("AMGCN_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"AMGCN_SEED must be an integer; got {raw!r}") from None


def _parse_scalar(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config_file(path) -> dict:
    """Parse a config file: JSON object, or flat key=value lines."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        return values
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        key, _, raw = line.partition("=")
        values[key.strip()] = _parse_scalar(raw.strip())
    return values


def build_train_config(args) -> TrainConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    overrides = {
        "variant": getattr(args, "variant", None),
        "channels": getattr(args, "channels", None),
        "seed": getattr(args, "seed", None),
        "epoch_max": getattr(args, "epochs", None),
        "k": getattr(args, "k", None),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in values:
        env = _env_seed()
        if env is not None:
            values["seed"] = env
    try:
        return TrainConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    generator = generate_case1 if args.case == "case1" else generate_case2
    dataset = generator(seed)
    save_dataset(dataset, args.out)
    print(f"wrote {args.case} dataset (seed {seed}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = build_train_config(args)
    dataset = load_dataset(args.data)
    if args.labels_per_class is not None:
        train_idx, test_idx = make_split(
            dataset, args.labels_per_class, test_size=args.test_size, seed=config.seed
        )
        dataset = with_split(dataset, train_idx, test_idx)
    if dataset.train_idx.size == 0 or dataset.test_idx.size == 0:
        raise ConfigError(
            "dataset has no train/test split; provide split.json or pass --labels-per-class"
        )

    params, history = train(dataset, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    inputs = prepare_inputs(dataset, config)
    state = full_forward(inputs, params, training=False, channels=config.channels)
    pred = state.probs.argmax(axis=1)
    report = MetricsReport.from_predictions(pred, dataset.labels, dataset.test_idx, dataset.n_classes)
    attn = reporting.attention_report(history, state)

    ckpt.save_checkpoint(out / CHECKPOINT_NAME, params, config)
    reporting.write_metrics_json(
        out / "metrics.json",
        report,
        extra={
            "train_accuracy": history.train_accuracy[-1],
            "final_loss": history.loss[-1].total,
            "attention_mean": dict(zip(("topology", "common", "feature"), attn.mean)),
            "dominant_channel": attn.dominant_channel,
            "variant": config.variant,
            "channels": config.channels,
            "seed": config.seed,
            "epochs": config.epoch_max,
        },
    )
    reporting.write_history_csv(history, out / "history.csv")
    reporting.write_attention_csv(state, dataset.labels, out / "attention.csv")
    if not args.no_figures:
        reporting.render_history_figure(history, out / "history.png")
        reporting.render_attention_trend_figure(history, out / "attention_trend.png")
        reporting.render_attention_box_figure(state, out / "attention_box.png")
    print(
        f"test accuracy {report.accuracy:.4f}, macro-F1 {report.macro_f1:.4f}; "
        + attn.verdict()
    )
    return 0


def _cmd_eval(args) -> int:
    params, config = ckpt.load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if dataset.test_idx.size == 0:
        raise ConfigError("dataset has no test split to evaluate on")
    inputs = prepare_inputs(dataset, config)
    state = full_forward(inputs, params, training=False, channels=config.channels)
    pred = state.probs.argmax(axis=1)
    report = MetricsReport.from_predictions(pred, dataset.labels, dataset.test_idx, dataset.n_classes)
    payload = {"schema_version": reporting.SCHEMA_VERSION}
    payload.update(report.as_dict())
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        reporting.write_metrics_json(args.out, report)
    if args.export_embeddings:
        reporting.export_embeddings(
            state, args.export_embeddings, dataset.labels, include_channels=args.export_channels
        )
    return 0


def _cmd_gradcheck(args) -> int:
    overrides = {}
    if args.config:
        values = load_config_file(args.config)
        try:
            cfg = TrainConfig.from_dict(values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        overrides = {
            "nhid1": cfg.nhid1,
            "nhid2": cfg.nhid2,
            "gamma": cfg.gamma,
            "beta": cfg.beta,
            "ce_mean": cfg.ce_mean,
            "channels": cfg.channels,
            "attn_per_channel": cfg.attn_per_channel,
        }
    all_ok = True
    for seed in args.seeds:
        report = finite_difference_check(
            seed=seed,
            tolerance=args.tolerance,
            n=args.nodes,
            d=args.features,
            n_classes=args.classes,
            **overrides,
        )
        for name, err in sorted(report.max_errors.items()):
            status = "ok" if err < report.tolerance else "FAIL"
            print(f"seed {seed}  {name:<12} max rel err {err:.3e}  {status}")
        all_ok &= report.passed
    print("gradient check: " + ("all tensors pass" if all_ok else "FAILURES above"))
    return 0 if all_ok else 1


def _cmd_knn_graph(args) -> int:
    dataset = load_dataset(args.data)
    metric = SimilarityMetric(args.metric, args.heat_t)
    graph = build_knn_graph(dataset.features, args.k, metric)
    with open(args.out, "w", newline="\n") as f:
        for i, j in graph.edge_list():
            f.write(f"{i}\t{j}\n")
    print(f"wrote {graph.num_edges} edges to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amgcn",
        description="Multi-channel graph convolutional network over topology and feature graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic case-study dataset")
    p.add_argument("case", choices=["case1", "case2"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="JSON or key=value config file")
    p.add_argument("--variant", choices=["full", "wo", "c", "d"], default=None)
    p.add_argument("--channels", choices=["all", "topology", "feature"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None, help="override epoch_max")
    p.add_argument("--k", type=int, default=None, help="override kNN graph k")
    p.add_argument("--labels-per-class", type=int, default=None, help="draw a fresh split")
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="also write metrics JSON here")
    p.add_argument("--export-embeddings", default=None, help="write embedding CSV here")
    p.add_argument("--export-channels", action="store_true", help="also export per-channel embeddings")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients by finite differences")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--nodes", type=int, default=30)
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--classes", type=int, default=3)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("knn-graph", help="build a kNN feature graph and write its edge list")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--metric", choices=["cosine", "heat"], default="cosine")
    p.add_argument("--heat-t", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_knn_graph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DatasetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 4
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
