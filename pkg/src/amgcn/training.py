"""Hand-derived reverse-mode gradients for the full objective, gradient
verification by central finite differences, Adam optimization, and the
full-batch training loop with ablation variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphs import (
    NormalizedAdjacency,
    SimilarityMetric,
    SparseGraph,
    build_knn_graph,
    normalize_adjacency,
    spmm,
)
from .losses import LossBreakdown, LossWeights, consistency_loss, cross_entropy, disparity_loss, total_loss
from .metrics import accuracy
from .model import (
    CHANNEL_MODES,
    ChannelCache,
    ForwardState,
    GcnChannelParams,
    ModelInputs,
    ModelParams,
    full_forward,
    init_params,
)

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "AdamState",
    "GradCheckReport",
    "adam_step",
    "backward",
    "channel_backward",
    "loss_from_state",
    "prepare_inputs",
    "train",
    "build_gradcheck_instance",
    "analytic_gradients",
    "numeric_gradients",
    "compare_gradients",
    "finite_difference_check",
]

VARIANTS = ("full", "wo", "c", "d")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass
class TrainConfig:
    """Everything that determines a training run.

    ``variant`` selects the constraint ablations: "full" keeps both
    constraint terms, "wo" drops both, "c" keeps only the consistency term,
    and "d" keeps only the disparity term. ``channels`` restricts the model
    to a single graph channel (single-GCN baselines); constraint terms are
    disabled in that mode since the common channel does not exist.
    """

    nhid1: int = 64
    nhid2: int = 32
    dropout: float = 0.5
    lr: float = 0.001
    weight_decay: float = 5e-3
    epoch_max: int = 200
    k: int = 5
    metric: str = "cosine"
    heat_t: float = 2.0
    gamma: float = 1e-3
    beta: float = 1e-8
    seed: int = 0
    variant: str = "full"
    channels: str = "all"
    ce_mean: bool = False
    attn_per_channel: bool = False
    attn_hidden: Optional[int] = None
    wd_gcn_only: bool = False

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}; got {self.variant!r}")
        if self.channels not in CHANNEL_MODES:
            raise ValueError(f"channels must be one of {CHANNEL_MODES}; got {self.channels!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epoch_max < 1:
            raise ValueError("epoch_max must be positive")
        SimilarityMetric(self.metric, self.heat_t)  # validates metric fields

    def loss_weights(self) -> LossWeights:
        """Effective constraint weights after variant/channel masking."""
        gamma = self.gamma if self.variant in ("full", "c") and self.channels == "all" else 0.0
        beta = self.beta if self.variant in ("full", "d") and self.channels == "all" else 0.0
        return LossWeights(gamma=gamma, beta=beta)

    def similarity_metric(self) -> SimilarityMetric:
        return SimilarityMetric(self.metric, self.heat_t)

    def to_dict(self) -> dict:
        return {
            "nhid1": self.nhid1,
            "nhid2": self.nhid2,
            "dropout": self.dropout,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "epoch_max": self.epoch_max,
            "k": self.k,
            "metric": self.metric,
            "heat_t": self.heat_t,
            "gamma": self.gamma,
            "beta": self.beta,
            "seed": self.seed,
            "variant": self.variant,
            "channels": self.channels,
            "ce_mean": self.ce_mean,
            "attn_per_channel": self.attn_per_channel,
            "attn_hidden": self.attn_hidden,
            "wd_gcn_only": self.wd_gcn_only,
        }

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = set(cls().to_dict())
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


@dataclass
class TrainHistory:
    """Per-epoch records of a training run.

    Losses are measured on the pre-step parameters of each epoch (the values
    the gradients were computed from); accuracies and attention means come
    from an eval-mode forward pass after the step. ``attention_mean`` rows
    are (topology, common, feature).
    """

    epochs: list[int] = field(default_factory=list)
    loss: list[LossBreakdown] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    attention_mean: list[tuple[float, float, float]] = field(default_factory=list)

    def append(
        self,
        epoch: int,
        loss: LossBreakdown,
        train_acc: float,
        test_acc: float,
        attn_mean: np.ndarray,
    ) -> None:
        self.epochs.append(epoch)
        self.loss.append(loss)
        self.train_accuracy.append(train_acc)
        self.test_accuracy.append(test_acc)
        self.attention_mean.append((float(attn_mean[0]), float(attn_mean[1]), float(attn_mean[2])))

    def __len__(self) -> int:
        return len(self.epochs)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def channel_backward(
    cache: ChannelCache,
    adj: NormalizedAdjacency,
    channel: GcnChannelParams,
    d_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of one two-layer channel pass with respect to its weights.

    ``d_out`` is the gradient of the loss with respect to the channel output.
    Relies on the normalized adjacency being symmetric.
    """
    d_pre2 = d_out * (cache.pre2 > 0)
    d_hw2 = spmm(adj, d_pre2)
    d_w2 = cache.hidden_drop.T @ d_hw2
    d_hidden = d_hw2 @ channel.w2.T
    if cache.mask_hidden is not None:
        d_hidden = d_hidden * cache.mask_hidden
    d_pre1 = d_hidden * (cache.pre1 > 0)
    d_xw1 = spmm(adj, d_pre1)
    d_w1 = cache.x_drop.T @ d_xw1
    return d_w1, d_w2


def _rownorm_backward(g: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # d/dz of z/||z||, applied rowwise; zero rows get zero gradient
    dot = np.sum(g * unit, axis=1, keepdims=True)
    out = (g - dot * unit) / np.where(norms > 0, norms, 1.0)[:, None]
    out[norms == 0] = 0.0
    return out


def _consistency_grads(z_a: np.ndarray, z_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of consistency_loss with respect to both embeddings."""
    norms_a = np.linalg.norm(z_a, axis=1)
    norms_b = np.linalg.norm(z_b, axis=1)
    a = z_a / np.where(norms_a > 0, norms_a, 1.0)[:, None]
    b = z_b / np.where(norms_b > 0, norms_b, 1.0)[:, None]
    # d||AA' - BB'||^2 / dA = 4 (AA' - BB') A, kept in h x h factors
    d_a = 4.0 * (a @ (a.T @ a) - b @ (b.T @ a))
    d_b = 4.0 * (b @ (b.T @ b) - a @ (a.T @ b))
    return _rownorm_backward(d_a, a, norms_a), _rownorm_backward(d_b, b, norms_b)


def _hsic_grads(z_a: np.ndarray, z_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of hsic(z_a, z_b) with respect to both embeddings."""
    n = z_a.shape[0]
    c = 2.0 / float(n - 1) ** 2
    ca = z_a - z_a.mean(axis=0)
    cb = z_b - z_b.mean(axis=0)
    d_a = c * (cb @ (cb.T @ ca))
    d_b = c * (ca @ (ca.T @ cb))
    return d_a, d_b


def backward(
    state: ForwardState,
    inputs: ModelInputs,
    params: ModelParams,
    labels: np.ndarray,
    train_idx: np.ndarray,
    weights: LossWeights,
    ce_mean: bool = False,
) -> ModelParams:
    """Analytic gradients of the total objective for every parameter tensor.

    The state must come from ``full_forward(..., training=True)`` so that the
    layer caches are present. Gradients through the shared common-channel
    weights are the sum of the two branch contributions.
    """
    if not state.training:
        raise ValueError("backward requires a forward state computed with training=True")
    labels = np.asarray(labels)
    train_idx = np.asarray(train_idx)
    grads = params.zeros_like()

    # softmax cross-entropy head: d(loss)/d(logits) = probs - onehot on train rows
    d_logits = np.zeros_like(state.probs)
    d_logits[train_idx] = state.probs[train_idx]
    d_logits[train_idx, labels[train_idx]] -= 1.0
    if ce_mean:
        d_logits /= train_idx.size
    grads.clf.w[:] = d_logits.T @ state.z_fused
    grads.clf.b[:] = d_logits.sum(axis=0)
    d_fused = d_logits @ params.clf.w

    if state.channels != "all":
        if state.channels == "topology":
            d_w1, d_w2 = channel_backward(state.topo_cache, inputs.adj_topo, params.topo, d_fused)
            grads.topo.w1[:] = d_w1
            grads.topo.w2[:] = d_w2
        else:
            d_w1, d_w2 = channel_backward(state.feat_cache, inputs.adj_feat, params.feat, d_fused)
            grads.feat.w1[:] = d_w1
            grads.feat.w2[:] = d_w2
        return grads

    # attention fusion: both the weighted-sum path and the score path feed
    # gradients back into each channel embedding
    zs = (state.z_topo, state.z_common, state.z_feat)
    alpha = state.attention
    d_z = [alpha[:, e : e + 1] * d_fused for e in range(3)]
    d_alpha = np.stack([np.sum(d_fused * zs[e], axis=1) for e in range(3)], axis=1)
    inner = np.sum(d_alpha * alpha, axis=1, keepdims=True)
    d_scores = alpha * (d_alpha - inner)

    attn = params.attn
    d_q = np.zeros_like(attn.q)
    d_w = np.zeros_like(attn.w)
    d_b = np.zeros_like(attn.b)
    for e in range(3):
        t = state.attn_cache.tanh[e]
        d_q += t.T @ d_scores[:, e]
        d_t = d_scores[:, e : e + 1] * attn.q[None, :]
        d_u = d_t * (1.0 - t * t)
        if attn.per_channel:
            d_w[e] += d_u.T @ zs[e]
            d_b[e] += d_u.sum(axis=0)
            d_z[e] = d_z[e] + d_u @ attn.w[e]
        else:
            d_w += d_u.T @ zs[e]
            d_b += d_u.sum(axis=0)
            d_z[e] = d_z[e] + d_u @ attn.w
    grads.attn.w[:] = d_w
    grads.attn.b[:] = d_b
    grads.attn.q[:] = d_q

    d_z_topo, d_z_common, d_z_feat = d_z
    d_z_ct = 0.5 * d_z_common
    d_z_cf = 0.5 * d_z_common

    if weights.gamma != 0.0:
        g_ct, g_cf = _consistency_grads(state.z_common_topo, state.z_common_feat)
        d_z_ct = d_z_ct + weights.gamma * g_ct
        d_z_cf = d_z_cf + weights.gamma * g_cf
    if weights.beta != 0.0:
        g_t, g_ct = _hsic_grads(state.z_topo, state.z_common_topo)
        d_z_topo = d_z_topo + weights.beta * g_t
        d_z_ct = d_z_ct + weights.beta * g_ct
        g_f, g_cf = _hsic_grads(state.z_feat, state.z_common_feat)
        d_z_feat = d_z_feat + weights.beta * g_f
        d_z_cf = d_z_cf + weights.beta * g_cf

    d_w1, d_w2 = channel_backward(state.topo_cache, inputs.adj_topo, params.topo, d_z_topo)
    grads.topo.w1[:] = d_w1
    grads.topo.w2[:] = d_w2
    d_w1, d_w2 = channel_backward(state.feat_cache, inputs.adj_feat, params.feat, d_z_feat)
    grads.feat.w1[:] = d_w1
    grads.feat.w2[:] = d_w2
    ct_w1, ct_w2 = channel_backward(state.common_topo_cache, inputs.adj_topo, params.common, d_z_ct)
    cf_w1, cf_w2 = channel_backward(state.common_feat_cache, inputs.adj_feat, params.common, d_z_cf)
    grads.common.w1[:] = ct_w1 + cf_w1
    grads.common.w2[:] = ct_w2 + cf_w2
    return grads


def loss_from_state(
    state: ForwardState,
    labels: np.ndarray,
    train_idx: np.ndarray,
    weights: LossWeights,
    ce_mean: bool = False,
) -> LossBreakdown:
    """Evaluate all objective terms on a forward state.

    In single-channel mode the constraint terms do not exist and are
    reported as zero.
    """
    ce = cross_entropy(state.probs, labels, train_idx, mean=ce_mean)
    if state.channels == "all":
        cons = consistency_loss(state.z_common_topo, state.z_common_feat)
        disp = disparity_loss(state.z_topo, state.z_common_topo, state.z_feat, state.z_common_feat)
    else:
        cons = 0.0
        disp = 0.0
    return total_loss(ce, cons, disp, weights)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Adam accumulators plus decoupled weight decay bookkeeping.

    Weight decay applies to weight matrices (including the attention scoring
    vector) but never to bias vectors; ``wd_gcn_only`` restricts it to the
    six channel weight matrices.
    """

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    decay: dict[str, bool] = field(default_factory=dict)

    @classmethod
    def for_params(
        cls,
        params: ModelParams,
        lr: float,
        weight_decay: float = 0.0,
        wd_gcn_only: bool = False,
    ) -> "AdamState":
        state = cls(lr=lr, weight_decay=weight_decay)
        for name, tensor in params.tensors():
            state.m[name] = np.zeros_like(tensor)
            state.v[name] = np.zeros_like(tensor)
            is_bias = name.endswith(".b")
            gcn_weight = name.split(".")[0] in ("topo", "feat", "common")
            state.decay[name] = (not is_bias) and (gcn_weight or not wd_gcn_only)
        return state


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState) -> ModelParams:
    """One bias-corrected Adam update; parameters are updated in place.

    Decoupled weight decay: lr * wd * theta is subtracted alongside the Adam
    step for every tensor marked for decay.
    """
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    grad_map = dict(grads.tensors())
    for name, p in params.tensors():
        g = grad_map[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if state.weight_decay and state.decay.get(name, False):
            update = update + state.weight_decay * p
        p -= state.lr * update
    return params


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def prepare_inputs(dataset, config: TrainConfig) -> ModelInputs:
    """Build the kNN feature graph and normalize both adjacencies."""
    features = np.asarray(dataset.features, dtype=np.float64)
    feat_graph = build_knn_graph(features, config.k, config.similarity_metric())
    return ModelInputs(
        adj_topo=normalize_adjacency(dataset.graph),
        adj_feat=normalize_adjacency(feat_graph),
        features=features,
    )


def train(dataset, config: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Full-batch training for ``epoch_max`` epochs; no early stopping.

    The RNG stream is consumed in a fixed order: parameter initialization
    first, then per-epoch dropout masks. Runs are fully determined by
    (dataset, config).
    """
    train_idx = np.asarray(dataset.train_idx)
    test_idx = np.asarray(dataset.test_idx)
    if train_idx.size == 0:
        raise ValueError("dataset has an empty training split")
    labels = np.asarray(dataset.labels)
    n_classes = int(labels.max()) + 1

    rng = np.random.default_rng(config.seed)
    inputs = prepare_inputs(dataset, config)
    params = init_params(
        rng,
        n_features=inputs.features.shape[1],
        nhid1=config.nhid1,
        nhid2=config.nhid2,
        n_classes=n_classes,
        attn_hidden=config.attn_hidden,
        attn_per_channel=config.attn_per_channel,
    )
    weights = config.loss_weights()
    opt = AdamState.for_params(params, config.lr, config.weight_decay, config.wd_gcn_only)
    history = TrainHistory()

    for epoch in range(config.epoch_max):
        state = full_forward(
            inputs, params, training=True, dropout=config.dropout, rng=rng, channels=config.channels
        )
        breakdown = loss_from_state(state, labels, train_idx, weights, config.ce_mean)
        if not np.isfinite(breakdown.total):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}: {breakdown}")
        grads = backward(state, inputs, params, labels, train_idx, weights, config.ce_mean)
        adam_step(params, grads, opt)

        eval_state = full_forward(inputs, params, training=False, channels=config.channels)
        pred = eval_state.probs.argmax(axis=1)
        train_acc = accuracy(pred, labels, train_idx)
        test_acc = accuracy(pred, labels, test_idx) if test_idx.size else float("nan")
        history.append(epoch, breakdown, train_acc, test_acc, eval_state.attention.mean(axis=0))
    return params, history


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckInstance:
    """A seeded random problem small enough for finite differences."""

    inputs: ModelInputs
    params: ModelParams
    labels: np.ndarray
    train_idx: np.ndarray
    weights: LossWeights
    ce_mean: bool = False
    channels: str = "all"


def build_gradcheck_instance(
    seed: int = 1,
    n: int = 30,
    d: int = 8,
    n_classes: int = 3,
    nhid1: int = 8,
    nhid2: int = 4,
    gamma: float = 1e-3,
    beta: float = 1e-9,
    edge_prob: float = 0.15,
    k: int = 3,
    ce_mean: bool = False,
    channels: str = "all",
    attn_per_channel: bool = False,
) -> GradCheckInstance:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < edge_prob
    topo = SparseGraph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))
    feat = build_knn_graph(x, k)
    labels = rng.integers(0, n_classes, size=n)
    train_idx = np.sort(rng.choice(n, size=n // 2, replace=False))
    params = init_params(rng, d, nhid1, nhid2, n_classes, attn_per_channel=attn_per_channel)
    return GradCheckInstance(
        inputs=ModelInputs(normalize_adjacency(topo), normalize_adjacency(feat), x),
        params=params,
        labels=labels,
        train_idx=train_idx,
        weights=LossWeights(gamma=gamma, beta=beta),
        ce_mean=ce_mean,
        channels=channels,
    )


def _instance_loss(inst: GradCheckInstance) -> float:
    state = full_forward(inst.inputs, inst.params, training=True, dropout=0.0, channels=inst.channels)
    return loss_from_state(state, inst.labels, inst.train_idx, inst.weights, inst.ce_mean).total


def analytic_gradients(inst: GradCheckInstance) -> ModelParams:
    state = full_forward(inst.inputs, inst.params, training=True, dropout=0.0, channels=inst.channels)
    return backward(state, inst.inputs, inst.params, inst.labels, inst.train_idx, inst.weights, inst.ce_mean)


def numeric_gradients(inst: GradCheckInstance, eps: float = 1e-5) -> ModelParams:
    """Central finite differences of the total loss, entry by entry."""
    grads = inst.params.zeros_like()
    grad_map = dict(grads.tensors())
    for name, tensor in inst.params.tensors():
        flat = tensor.ravel()
        g = grad_map[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = _instance_loss(inst)
            flat[i] = orig - eps
            down = _instance_loss(inst)
            flat[i] = orig
            g[i] = (up - down) / (2.0 * eps)
    return grads


def compare_gradients(
    analytic: ModelParams, numeric: ModelParams, rel_floor: float = 1e-3
) -> dict[str, float]:
    """Per-tensor max elementwise relative error.

    Denominators are floored at ``rel_floor`` so that finite-difference noise
    on near-zero entries does not dominate.
    """
    numeric_map = dict(numeric.tensors())
    errors = {}
    for name, a in analytic.tensors():
        f = numeric_map[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), rel_floor)
        errors[name] = float(np.max(np.abs(a - f) / denom)) if a.size else 0.0
    return errors


@dataclass
class GradCheckReport:
    max_errors: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e < self.tolerance for e in self.max_errors.values())

    def failing(self) -> list[str]:
        return [name for name, e in self.max_errors.items() if e >= self.tolerance]

    def worst(self) -> tuple[str, float]:
        name = max(self.max_errors, key=self.max_errors.get)
        return name, self.max_errors[name]


def finite_difference_check(
    seed: int = 1,
    tolerance: float = 1e-4,
    eps: float = 1e-5,
    **instance_kwargs,
) -> GradCheckReport:
    """Compare analytic against central-difference gradients on a seeded
    instance (dropout is off so the loss is deterministic)."""
    inst = build_gradcheck_instance(seed=seed, **instance_kwargs)
    errors = compare_gradients(analytic_gradients(inst), numeric_gradients(inst, eps))
    return GradCheckReport(max_errors=errors, tolerance=tolerance)
