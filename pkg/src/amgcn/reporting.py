"""Attention analysis, embedding export, report files, and figures.

Reports are plain CSV/JSON with stable schemas (schema_version 1); figures
are rendered next to them as PNG files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import MetricsReport
from .model import CHANNEL_ORDER, ForwardState
from .training import TrainHistory

__all__ = [
    "SCHEMA_VERSION",
    "HISTORY_COLUMNS",
    "ATTENTION_COLUMNS",
    "AttentionReport",
    "attention_report",
    "write_history_csv",
    "write_attention_csv",
    "write_metrics_json",
    "export_embeddings",
    "render_history_figure",
    "render_attention_trend_figure",
    "render_attention_box_figure",
]

SCHEMA_VERSION = 1

HISTORY_COLUMNS = [
    "epoch",
    "loss_total",
    "loss_cross_entropy",
    "loss_consistency",
    "loss_disparity",
    "train_accuracy",
    "test_accuracy",
    "attn_topology",
    "attn_common",
    "attn_feature",
]

ATTENTION_COLUMNS = ["node_id", "label", "attn_topology", "attn_common", "attn_feature"]


@dataclass(frozen=True)
class AttentionReport:
    """Final per-node attention plus per-channel statistics and the
    per-epoch mean trend (all in topology/common/feature order)."""

    per_node: np.ndarray  # (n, 3)
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    trend: np.ndarray  # (epochs, 3)

    @property
    def dominant_channel(self) -> str:
        return CHANNEL_ORDER[int(np.argmax(self.mean))]

    def verdict(self) -> str:
        return f"largest mean attention is on the {self.dominant_channel} channel"


def attention_report(history: TrainHistory, state: ForwardState) -> AttentionReport:
    per_node = np.asarray(state.attention, dtype=np.float64)
    return AttentionReport(
        per_node=per_node,
        mean=tuple(float(v) for v in per_node.mean(axis=0)),
        std=tuple(float(v) for v in per_node.std(axis=0)),
        trend=np.asarray(history.attention_mean, dtype=np.float64),
    )


def write_history_csv(history: TrainHistory, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(HISTORY_COLUMNS)
        for i, epoch in enumerate(history.epochs):
            loss = history.loss[i]
            attn = history.attention_mean[i]
            writer.writerow(
                [
                    epoch,
                    "%.17g" % loss.total,
                    "%.17g" % loss.cross_entropy,
                    "%.17g" % loss.consistency,
                    "%.17g" % loss.disparity,
                    "%.17g" % history.train_accuracy[i],
                    "%.17g" % history.test_accuracy[i],
                    "%.17g" % attn[0],
                    "%.17g" % attn[1],
                    "%.17g" % attn[2],
                ]
            )


def write_attention_csv(state: ForwardState, labels: np.ndarray, path) -> None:
    alpha = state.attention
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ATTENTION_COLUMNS)
        for i in range(alpha.shape[0]):
            writer.writerow(
                [i, int(labels[i])] + ["%.17g" % v for v in alpha[i]]
            )


def write_metrics_json(path, report: MetricsReport, extra: dict | None = None) -> None:
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(report.as_dict())
    if extra:
        payload.update(extra)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def export_embeddings(
    state: ForwardState,
    path,
    labels: np.ndarray,
    include_channels: bool = False,
) -> list[Path]:
    """Write the fused embedding as CSV (node_id, label, z_0..z_{h-1}).

    With ``include_channels`` the three channel embeddings are written next
    to it with _topology/_common/_feature suffixes. Values round-trip at
    full f64 precision.
    """
    path = Path(path)
    written = [path]
    _write_embedding_csv(path, state.z_fused, labels)
    if include_channels:
        for suffix, z in (
            ("topology", state.z_topo),
            ("common", state.z_common),
            ("feature", state.z_feat),
        ):
            if z is None:
                continue
            channel_path = path.with_name(f"{path.stem}_{suffix}{path.suffix}")
            _write_embedding_csv(channel_path, z, labels)
            written.append(channel_path)
    return written


def _write_embedding_csv(path, z: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["node_id", "label"] + [f"z{j}" for j in range(z.shape[1])])
        for i in range(z.shape[0]):
            writer.writerow([i, int(labels[i])] + ["%.17g" % v for v in z[i]])


def render_history_figure(history: TrainHistory, path) -> None:
    """Loss terms and accuracies against the epoch counter."""
    epochs = history.epochs
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [l.total for l in history.loss], label="total")
    ax_loss.plot(epochs, [l.cross_entropy for l in history.loss], label="cross-entropy", ls="--")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(frameon=False)
    ax_acc.plot(epochs, history.train_accuracy, label="train")
    ax_acc.plot(epochs, history.test_accuracy, label="test")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0, 1.02)
    ax_acc.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_attention_trend_figure(history: TrainHistory, path) -> None:
    """Mean attention per channel against the epoch counter."""
    trend = np.asarray(history.attention_mean)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for e, name in enumerate(CHANNEL_ORDER):
        ax.plot(history.epochs, trend[:, e], label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean attention")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_attention_box_figure(state: ForwardState, path) -> None:
    """Distribution of the final per-node attention values per channel."""
    alpha = state.attention
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.boxplot([alpha[:, e] for e in range(3)], tick_labels=list(CHANNEL_ORDER))
    ax.set_ylabel("attention value")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
