"""Training objective terms.

Three scalar terms make up the objective: classification cross-entropy over
the labeled nodes, a consistency penalty that pulls the two common-channel
embeddings toward the same node-similarity structure, and a disparity
penalty (HSIC with inner-product kernels) that pushes each specific
embedding away from the common embedding of the same graph.

The n x n Gram matrices these terms are defined through are never
materialized; everything is evaluated through h x h factor products, which
is algebraically identical and linear in n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LOG_CLAMP",
    "LossWeights",
    "LossBreakdown",
    "cross_entropy",
    "row_l2_normalize",
    "consistency_loss",
    "hsic",
    "disparity_loss",
    "total_loss",
]

# floor inside log(): numerically safe, invisible at f64 for any trained model
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the consistency (gamma) and disparity (beta) terms."""

    gamma: float = 1e-3
    beta: float = 1e-8

    def __post_init__(self) -> None:
        for name, value in (("gamma", self.gamma), ("beta", self.beta)):
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative; got {value}")


@dataclass(frozen=True)
class LossBreakdown:
    """Raw objective terms plus the weighted total."""

    cross_entropy: float
    consistency: float
    disparity: float
    total: float


def cross_entropy(
    probs: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    mean: bool = False,
) -> float:
    """Negative log-likelihood of the true classes, summed over the training
    nodes (``mean=True`` averages instead)."""
    labels = np.asarray(labels)
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise ValueError("training index set is empty")
    train_labels = labels[train_idx]
    if train_labels.min() < 0 or train_labels.max() >= probs.shape[1]:
        raise ValueError("label out of range for the probability matrix")
    p = probs[train_idx, train_labels]
    loss = float(-np.log(np.maximum(p, LOG_CLAMP)).sum())
    return loss / train_idx.size if mean else loss


def row_l2_normalize(z: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; all-zero rows are left as zero."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    return z / np.where(norms > 0, norms, 1.0)[:, None]


def consistency_loss(z_a: np.ndarray, z_b: np.ndarray) -> float:
    """Squared Frobenius distance between the normalized Gram (cosine
    similarity) matrices of the two embeddings.

    Invariant to positive per-row rescaling of either argument.
    """
    if z_a.shape[0] != z_b.shape[0]:
        raise ValueError("embeddings must have the same number of rows")
    a = row_l2_normalize(z_a)
    b = row_l2_normalize(z_b)
    gaa = a.T @ a
    gbb = b.T @ b
    gab = a.T @ b
    # ||A A' - B B'||_F^2 expanded through the h x h factor Grams
    value = float((gaa * gaa).sum() - 2.0 * (gab * gab).sum() + (gbb * gbb).sum())
    return max(value, 0.0)


def hsic(z_a: np.ndarray, z_b: np.ndarray) -> float:
    """Hilbert-Schmidt independence criterion with inner-product kernels:
    (n-1)^{-2} tr(R K_a R K_b), R = I - ee'/n.

    Centering the factors directly gives R K R = (R Z)(R Z)', so the trace
    reduces to the squared Frobenius norm of an h_a x h_b matrix.
    """
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.ndim != 2 or z_b.ndim != 2:
        raise ValueError("embeddings must be two-dimensional")
    if z_a.shape[0] != z_b.shape[0]:
        raise ValueError("embeddings must have the same number of rows")
    n = z_a.shape[0]
    if n < 2:
        raise ValueError("HSIC needs at least two rows")
    ca = z_a - z_a.mean(axis=0)
    cb = z_b - z_b.mean(axis=0)
    m = ca.T @ cb
    return float((m * m).sum()) / float(n - 1) ** 2


def disparity_loss(
    z_topo: np.ndarray,
    z_common_topo: np.ndarray,
    z_feat: np.ndarray,
    z_common_feat: np.ndarray,
) -> float:
    """Sum of the two same-graph HSIC terms."""
    return hsic(z_topo, z_common_topo) + hsic(z_feat, z_common_feat)


def total_loss(
    ce: float, consistency: float, disparity: float, weights: LossWeights
) -> LossBreakdown:
    total = ce + weights.gamma * consistency + weights.beta * disparity
    return LossBreakdown(
        cross_entropy=float(ce),
        consistency=float(consistency),
        disparity=float(disparity),
        total=float(total),
    )
