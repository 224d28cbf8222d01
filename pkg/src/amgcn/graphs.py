"""Graph containers, node-similarity measures, kNN graph construction, and
symmetric adjacency normalization.

Similarity matrices are materialized densely (n x n, 8 bytes per entry), which
keeps the code simple for graphs up to a few tens of thousands of nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SimilarityMetric",
    "SparseGraph",
    "NormalizedAdjacency",
    "cosine_similarity",
    "heat_kernel_similarity",
    "similarity_matrix",
    "build_knn_graph",
    "normalize_adjacency",
    "spmm",
]


@dataclass(frozen=True)
class SimilarityMetric:
    """Pairwise feature similarity: plain cosine, or a heat kernel with time
    parameter ``t``."""

    kind: str = "cosine"
    t: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("cosine", "heat"):
            raise ValueError(f"unknown similarity metric: {self.kind!r}")
        if self.kind == "heat" and not self.t > 0:
            raise ValueError("heat kernel time parameter must be positive")

    @classmethod
    def cosine(cls) -> "SimilarityMetric":
        return cls("cosine")

    @classmethod
    def heat(cls, t: float = 2.0) -> "SimilarityMetric":
        return cls("heat", t)


@dataclass
class SparseGraph:
    """Undirected, unweighted graph stored in CSR form.

    Invariants: structurally symmetric, no duplicate entries, column indices
    sorted within each row, and no stored self-loops (self-loops only appear
    through the +I term of normalization).
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: np.ndarray) -> "SparseGraph":
        """Build a graph from an (m, 2) array of undirected edges.

        Either orientation may be given and duplicates are merged; the edge
        set is symmetrized by union. Self-loops are rejected.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed in SparseGraph")
        both = np.vstack([edges, edges[:, ::-1]])
        mat = sp.coo_matrix(
            (np.ones(len(both)), (both[:, 0], both[:, 1])), shape=(n, n)
        ).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        mat.data[:] = 1.0
        return cls(
            n=n,
            row_ptr=mat.indptr.astype(np.int64),
            col_idx=mat.indices.astype(np.int64),
            values=mat.data.astype(np.float64),
        )

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=(self.n, self.n)
        )

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.col_idx.size // 2

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with i < j, sorted."""
        rows = np.repeat(np.arange(self.n), self.degrees())
        keep = rows < self.col_idx
        return np.column_stack([rows[keep], self.col_idx[keep]])

    def validate(self) -> None:
        """Raise ValueError if any structural invariant is violated."""
        a = self.to_scipy()
        if (a != a.T).nnz != 0:
            raise ValueError("adjacency is not symmetric")
        if np.any(a.diagonal() != 0):
            raise ValueError("adjacency stores self-loops")
        for i in range(self.n):
            cols = self.col_idx[self.row_ptr[i] : self.row_ptr[i + 1]]
            if cols.size > 1 and not np.all(np.diff(cols) > 0):
                raise ValueError(f"row {i} has unsorted or duplicate columns")


@dataclass
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops, in CSR form.

    Entry (i, j) equals 1/sqrt(d_i * d_j) where d is the degree-plus-one of
    the underlying graph; the diagonal is always present and positive.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=(self.n, self.n)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def _check_features(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("feature matrix must be two-dimensional")
    if not np.isfinite(x).all():
        raise ValueError("feature matrix contains non-finite entries")
    return x


def cosine_similarity(x: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of the rows of ``x``.

    Rows with zero norm get similarity 0 against every node (including
    themselves), which avoids NaN and leaves featureless nodes without
    affinity to anything.
    """
    x = _check_features(x)
    norms = np.linalg.norm(x, axis=1)
    nonzero = norms > 0
    unit = x / np.where(nonzero, norms, 1.0)[:, None]
    s = unit @ unit.T
    s = (s + s.T) / 2.0
    s[~nonzero, :] = 0.0
    s[:, ~nonzero] = 0.0
    np.fill_diagonal(s, np.where(nonzero, 1.0, 0.0))
    return s


def heat_kernel_similarity(x: np.ndarray, t: float = 2.0) -> np.ndarray:
    """Pairwise heat-kernel similarity exp(-||x_i - x_j||^2 / t)."""
    x = _check_features(x)
    if not t > 0:
        raise ValueError("heat kernel time parameter must be positive")
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)  # clip the tiny negatives from cancellation
    s = np.exp(-d2 / t)
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return s


def similarity_matrix(x: np.ndarray, metric: SimilarityMetric) -> np.ndarray:
    if metric.kind == "cosine":
        return cosine_similarity(x)
    return heat_kernel_similarity(x, metric.t)


def build_knn_graph(
    x: np.ndarray, k: int, metric: SimilarityMetric = SimilarityMetric()
) -> SparseGraph:
    """Connect each node to its k most-similar other nodes.

    Self-similarity is excluded from the selection, ties are broken toward
    the lower node index, and the directed selection is symmetrized by union,
    so every node ends up with degree at least k.
    """
    x = _check_features(x)
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, n-1]; got k={k} for n={n}")
    s = similarity_matrix(x, metric)
    np.fill_diagonal(s, -np.inf)
    order = np.argsort(-s, axis=1, kind="stable")
    nbrs = order[:, :k]
    src = np.repeat(np.arange(n), k)
    return SparseGraph.from_edges(n, np.column_stack([src, nbrs.ravel()]))


def normalize_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    """Compute D^{-1/2} (A + I) D^{-1/2} with D = diag(rowsum(A + I)).

    Isolated nodes are fine: their degree-plus-one is 1, giving a unit
    diagonal entry.
    """
    a_tilde = (g.to_scipy() + sp.identity(g.n, format="csr")).tocsr()
    a_tilde.sort_indices()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows = np.repeat(np.arange(g.n), np.diff(a_tilde.indptr))
    data = a_tilde.data * inv_sqrt[rows] * inv_sqrt[a_tilde.indices]
    return NormalizedAdjacency(
        n=g.n,
        row_ptr=a_tilde.indptr.astype(np.int64),
        col_idx=a_tilde.indices.astype(np.int64),
        values=data,
    )


def spmm(adj: NormalizedAdjacency, h: np.ndarray) -> np.ndarray:
    """Sparse-dense product adj @ h.

    Accumulation runs in ascending column order within each row (CSR order),
    so results are reproducible bit-for-bit on a given platform.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != adj.n:
        raise ValueError(f"operand of shape {h.shape} incompatible with {adj.n} nodes")
    return adj.to_scipy() @ h
