"""Forward model: two graph-specific GCN channels, a shared-weight common
channel run on both graphs, per-node attention fusion, and a linear
classifier.

Channel embeddings are ordered (topology, common, feature) everywhere an
axis of size 3 appears.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .graphs import NormalizedAdjacency, spmm

CHANNEL_ORDER = ("topology", "common", "feature")
CHANNEL_MODES = ("all", "topology", "feature")


@dataclass
class GcnChannelParams:
    """Weights of one two-layer GCN channel."""

    w1: np.ndarray  # (n_features, nhid1)
    w2: np.ndarray  # (nhid1, nhid2)


@dataclass
class AttentionParams:
    """Attention transform, bias, and scoring vector.

    ``w`` is (h_attn, nhid2) when shared across channels, or (3, h_attn,
    nhid2) with one slice per channel; ``b`` follows the same convention.
    The scoring vector ``q`` is always shared.
    """

    w: np.ndarray
    b: np.ndarray
    q: np.ndarray

    @property
    def per_channel(self) -> bool:
        return self.w.ndim == 3


@dataclass
class ClassifierParams:
    w: np.ndarray  # (n_classes, nhid2)
    b: np.ndarray  # (n_classes,)


@dataclass
class ModelParams:
    """All trainable tensors. The common channel's weights are applied to
    both graphs (parameter sharing); topo and feat channels are independent."""

    topo: GcnChannelParams
    feat: GcnChannelParams
    common: GcnChannelParams
    attn: AttentionParams
    clf: ClassifierParams

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield (name, array) pairs in a fixed, documented order."""
        yield "topo.w1", self.topo.w1
        yield "topo.w2", self.topo.w2
        yield "feat.w1", self.feat.w1
        yield "feat.w2", self.feat.w2
        yield "common.w1", self.common.w1
        yield "common.w2", self.common.w2
        yield "attn.w", self.attn.w
        yield "attn.b", self.attn.b
        yield "attn.q", self.attn.q
        yield "clf.w", self.clf.w
        yield "clf.b", self.clf.b

    def copy(self) -> "ModelParams":
        return ModelParams(
            topo=GcnChannelParams(self.topo.w1.copy(), self.topo.w2.copy()),
            feat=GcnChannelParams(self.feat.w1.copy(), self.feat.w2.copy()),
            common=GcnChannelParams(self.common.w1.copy(), self.common.w2.copy()),
            attn=AttentionParams(self.attn.w.copy(), self.attn.b.copy(), self.attn.q.copy()),
            clf=ClassifierParams(self.clf.w.copy(), self.clf.b.copy()),
        )

    def zeros_like(self) -> "ModelParams":
        out = self.copy()
        for _, t in out.tensors():
            t[:] = 0.0
        return out


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    rng: np.random.Generator,
    n_features: int,
    nhid1: int,
    nhid2: int,
    n_classes: int,
    attn_hidden: Optional[int] = None,
    attn_per_channel: bool = False,
) -> ModelParams:
    """Glorot-uniform weight matrices, zero biases.

    Draw order (relevant for seed reproducibility): topo.w1, topo.w2,
    feat.w1, feat.w2, common.w1, common.w2, attn.w, attn.q, clf.w.
    """
    h_attn = nhid2 if attn_hidden is None else attn_hidden

    def channel() -> GcnChannelParams:
        return GcnChannelParams(
            w1=_glorot(rng, (n_features, nhid1), n_features, nhid1),
            w2=_glorot(rng, (nhid1, nhid2), nhid1, nhid2),
        )

    topo, feat, common = channel(), channel(), channel()
    if attn_per_channel:
        w = np.stack([_glorot(rng, (h_attn, nhid2), nhid2, h_attn) for _ in range(3)])
        b = np.zeros((3, h_attn))
    else:
        w = _glorot(rng, (h_attn, nhid2), nhid2, h_attn)
        b = np.zeros(h_attn)
    q = _glorot(rng, (h_attn,), h_attn, 1)
    clf = ClassifierParams(w=_glorot(rng, (n_classes, nhid2), nhid2, n_classes), b=np.zeros(n_classes))
    return ModelParams(topo=topo, feat=feat, common=common, attn=AttentionParams(w, b, q), clf=clf)


@dataclass
class ChannelCache:
    """Intermediates of one channel pass, kept for the backward pass."""

    x_drop: np.ndarray
    pre1: np.ndarray
    hidden_drop: np.ndarray
    pre2: np.ndarray
    mask_in: Optional[np.ndarray]
    mask_hidden: Optional[np.ndarray]


@dataclass
class AttentionCache:
    tanh: tuple[np.ndarray, np.ndarray, np.ndarray]  # per channel, (n, h_attn)


@dataclass
class ModelInputs:
    """Prepared model inputs: both normalized adjacencies plus features."""

    adj_topo: NormalizedAdjacency
    adj_feat: NormalizedAdjacency
    features: np.ndarray


@dataclass
class ForwardState:
    """Everything produced by one forward pass.

    ``attention`` has one row per node with columns ordered (topology,
    common, feature); each row sums to 1. Caches are populated only when
    the pass ran with training=True.
    """

    z_topo: Optional[np.ndarray]
    z_feat: Optional[np.ndarray]
    z_common_topo: Optional[np.ndarray]
    z_common_feat: Optional[np.ndarray]
    z_common: Optional[np.ndarray]
    z_fused: np.ndarray
    attention: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    channels: str = "all"
    training: bool = False
    topo_cache: Optional[ChannelCache] = None
    feat_cache: Optional[ChannelCache] = None
    common_topo_cache: Optional[ChannelCache] = None
    common_feat_cache: Optional[ChannelCache] = None
    attn_cache: Optional[AttentionCache] = None


def _dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], rate: float) -> np.ndarray:
    # inverted dropout: scale kept units by 1/(1-rate) so eval needs no rescale
    return (rng.random(shape) >= rate) / (1.0 - rate)


def gcn_layer(
    adj: NormalizedAdjacency, h: np.ndarray, w: np.ndarray, activate: bool = True
) -> np.ndarray:
    """One graph convolution: adj @ h @ w, ReLU-activated unless disabled."""
    pre = spmm(adj, h @ w)
    return np.maximum(pre, 0.0) if activate else pre


def channel_forward(
    adj: NormalizedAdjacency,
    x: np.ndarray,
    channel: GcnChannelParams,
    dropout: float = 0.0,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, Optional[ChannelCache]]:
    """Two stacked GCN layers with ReLU after each.

    While training, inverted dropout is applied to the input of each layer.
    Returns (embedding, cache); the cache is None in eval mode.
    """
    use_dropout = training and dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training with dropout requires a random generator")
    mask_in = _dropout_mask(rng, x.shape, dropout) if use_dropout else None
    x0 = x * mask_in if mask_in is not None else x
    pre1 = spmm(adj, x0 @ channel.w1)
    h1 = np.maximum(pre1, 0.0)
    mask_hidden = _dropout_mask(rng, h1.shape, dropout) if use_dropout else None
    h1d = h1 * mask_hidden if mask_hidden is not None else h1
    pre2 = spmm(adj, h1d @ channel.w2)
    z = np.maximum(pre2, 0.0)
    cache = ChannelCache(x0, pre1, h1d, pre2, mask_in, mask_hidden) if training else None
    return z, cache


def common_forward(
    adj_topo: NormalizedAdjacency,
    adj_feat: NormalizedAdjacency,
    x: np.ndarray,
    channel: GcnChannelParams,
    dropout: float = 0.0,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, Optional[ChannelCache], Optional[ChannelCache]]:
    """Run the shared-weight channel on both graphs and average the outputs.

    Dropout masks are drawn independently for the two branches (topology
    branch first). Returns (z_common_topo, z_common_feat, z_common, caches).
    """
    z_ct, cache_ct = channel_forward(adj_topo, x, channel, dropout, training, rng)
    z_cf, cache_cf = channel_forward(adj_feat, x, channel, dropout, training, rng)
    z_c = (z_ct + z_cf) / 2.0
    return z_ct, z_cf, z_c, cache_ct, cache_cf


def attention_fuse(
    z_topo: np.ndarray,
    z_common: np.ndarray,
    z_feat: np.ndarray,
    attn: AttentionParams,
) -> tuple[np.ndarray, np.ndarray, AttentionCache]:
    """Score each channel embedding per node and combine them.

    Scores are q . tanh(W z + b); the three scores per node go through a
    max-shifted softmax, and the fused embedding is the weighted sum of the
    channel embeddings. Returns (fused, weights, cache) with weights (n, 3).
    """
    zs = (z_topo, z_common, z_feat)
    n = z_topo.shape[0]
    scores = np.empty((n, 3))
    tanhs = []
    for e, z in enumerate(zs):
        w = attn.w[e] if attn.per_channel else attn.w
        b = attn.b[e] if attn.per_channel else attn.b
        t = np.tanh(z @ w.T + b)
        tanhs.append(t)
        scores[:, e] = t @ attn.q
    shifted = scores - scores.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    alpha = exps / exps.sum(axis=1, keepdims=True)
    fused = alpha[:, 0:1] * z_topo + alpha[:, 1:2] * z_common + alpha[:, 2:3] * z_feat
    return fused, alpha, AttentionCache(tuple(tanhs))


def classify(z: np.ndarray, clf: ClassifierParams) -> tuple[np.ndarray, np.ndarray]:
    """Linear logits and row-wise softmax probabilities."""
    logits = z @ clf.w.T + clf.b
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=1, keepdims=True)
    return logits, probs


def full_forward(
    inputs: ModelInputs,
    params: ModelParams,
    training: bool = False,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    channels: str = "all",
) -> ForwardState:
    """Run the complete model.

    ``channels`` restricts the model to a single channel ("topology" or
    "feature"), used for the single-graph ablations; in that mode the fused
    embedding is that channel's output and the attention matrix is the
    corresponding one-hot. Dropout draw order with channels="all": topology
    channel, feature channel, common channel (topology branch, then feature
    branch); two masks per channel pass (layer-1 input, layer-2 input).
    """
    if channels not in CHANNEL_MODES:
        raise ValueError(f"channels must be one of {CHANNEL_MODES}; got {channels!r}")
    x = np.asarray(inputs.features, dtype=np.float64)
    if channels == "all":
        z_t, cache_t = channel_forward(inputs.adj_topo, x, params.topo, dropout, training, rng)
        z_f, cache_f = channel_forward(inputs.adj_feat, x, params.feat, dropout, training, rng)
        z_ct, z_cf, z_c, cache_ct, cache_cf = common_forward(
            inputs.adj_topo, inputs.adj_feat, x, params.common, dropout, training, rng
        )
        fused, alpha, attn_cache = attention_fuse(z_t, z_c, z_f, params.attn)
        logits, probs = classify(fused, params.clf)
        return ForwardState(
            z_topo=z_t,
            z_feat=z_f,
            z_common_topo=z_ct,
            z_common_feat=z_cf,
            z_common=z_c,
            z_fused=fused,
            attention=alpha,
            logits=logits,
            probs=probs,
            channels=channels,
            training=training,
            topo_cache=cache_t,
            feat_cache=cache_f,
            common_topo_cache=cache_ct,
            common_feat_cache=cache_cf,
            attn_cache=attn_cache,
        )

    if channels == "topology":
        adj, ch = inputs.adj_topo, params.topo
    else:
        adj, ch = inputs.adj_feat, params.feat
    z, cache = channel_forward(adj, x, ch, dropout, training, rng)
    alpha = np.zeros((z.shape[0], 3))
    alpha[:, CHANNEL_ORDER.index(channels)] = 1.0
    logits, probs = classify(z, params.clf)
    return ForwardState(
        z_topo=z if channels == "topology" else None,
        z_feat=z if channels == "feature" else None,
        z_common_topo=None,
        z_common_feat=None,
        z_common=None,
        z_fused=z,
        attention=alpha,
        logits=logits,
        probs=probs,
        channels=channels,
        training=training,
        topo_cache=cache if channels == "topology" else None,
        feat_cache=cache if channels == "feature" else None,
    )
