"""Versioned checkpoint files: model parameters plus the training config.

The format is a numpy .npz archive with one entry per parameter tensor
(dots in tensor names become double underscores), the config as a JSON
string, and a format version. Round-trips are lossless at f64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import AttentionParams, ClassifierParams, GcnChannelParams, ModelParams
from .training import TrainConfig

__all__ = ["FORMAT_VERSION", "save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = 1


def save_checkpoint(path, params: ModelParams, config: TrainConfig) -> None:
    arrays = {name.replace(".", "__"): tensor for name, tensor in params.tensors()}
    np.savez(
        path,
        format_version=np.int64(FORMAT_VERSION),
        config_json=np.str_(json.dumps(config.to_dict(), sort_keys=True)),
        **arrays,
    )


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig]:
    path = Path(path)
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version} in {path}")
        config = TrainConfig.from_dict(json.loads(str(archive["config_json"])))
        t = {name: archive[name.replace('.', '__')].copy() for name in (
            "topo.w1", "topo.w2", "feat.w1", "feat.w2", "common.w1", "common.w2",
            "attn.w", "attn.b", "attn.q", "clf.w", "clf.b",
        )}
    params = ModelParams(
        topo=GcnChannelParams(t["topo.w1"], t["topo.w2"]),
        feat=GcnChannelParams(t["feat.w1"], t["feat.w2"]),
        common=GcnChannelParams(t["common.w1"], t["common.w2"]),
        attn=AttentionParams(t["attn.w"], t["attn.b"], t["attn.q"]),
        clf=ClassifierParams(t["clf.w"], t["clf.b"]),
    )
    return params, config
