"""Synthetic case-study generators, the on-disk dataset format, loaders, and
split construction.

Dataset directory layout (all text files UTF-8, LF line endings, 0-based
integer node ids):

    edges.tsv     two whitespace-separated integer columns, one undirected
                  edge per line; duplicates are merged and orientation is
                  irrelevant (symmetrized by union on load)
    features.csv  dense feature matrix, one comma-separated row per node
    labels.tsv    node_id <TAB> class_id, one line per node
    split.json    {"train": [...], "test": [...]} (optional)
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .graphs import SparseGraph

__all__ = [
    "CASE_GAUSSIAN",
    "CASE_SBM",
    "SyntheticSpec",
    "LabeledDataset",
    "DatasetFormatError",
    "DatasetWarning",
    "generate_case1",
    "generate_case2",
    "save_dataset",
    "load_dataset",
    "make_split",
    "with_split",
]

CASE_GAUSSIAN = "gaussian-features"
CASE_SBM = "sbm-topology"


class DatasetWarning(UserWarning):
    """Non-fatal dataset issues (e.g. dropped self-loops)."""


class DatasetFormatError(ValueError):
    """A malformed dataset directory; ``code`` identifies the failure class.

    Codes: missing-file, parse-error, ragged-features, label-missing,
    duplicate-label, label-gap, index-out-of-range, split-overlap.
    """

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"[{code}] {message}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the two synthetic case studies."""

    case: str
    n: int = 900
    n_features: int = 50
    n_classes: int = 3
    p_uniform: float = 0.03
    p_intra: float = 0.03
    p_inter: float = 0.0015
    center_separation: float = 10.0
    train_per_class: int = 20
    test_per_class: int = 200

    def __post_init__(self) -> None:
        if self.case not in (CASE_GAUSSIAN, CASE_SBM):
            raise ValueError(f"unknown case: {self.case!r}")
        for name in ("p_uniform", "p_intra", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability; got {p}")
        if self.n % self.n_classes != 0:
            raise ValueError("n must be divisible by the number of classes")


@dataclass
class LabeledDataset:
    """Graph, features, labels, and a train/test split."""

    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def validate(self) -> None:
        n = self.n
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError("features/labels row count does not match node count")
        present = np.unique(self.labels)
        if present[0] != 0 or not np.array_equal(present, np.arange(present.size)):
            raise ValueError("labels must cover 0..C-1 without gaps")
        for idx in (self.train_idx, self.test_idx):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError("split index out of range")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test splits overlap")


def _bernoulli_edges(rng: np.random.Generator, n: int, probs) -> np.ndarray:
    # one draw per unordered pair, in fixed (i < j) row-major order
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < probs
    return np.column_stack([iu[keep], ju[keep]])


def _simplex_centers(n_classes: int, dim: int, separation: float) -> np.ndarray:
    # scaled standard-basis vertices: pairwise distance = separation exactly
    if dim < n_classes:
        raise ValueError("feature dimension must be at least the class count")
    centers = np.zeros((n_classes, dim))
    centers[np.arange(n_classes), np.arange(n_classes)] = separation / np.sqrt(2.0)
    return centers


def _per_class_split(
    rng: np.random.Generator, labels: np.ndarray, train_per_class: int, test_per_class: int
) -> tuple[np.ndarray, np.ndarray]:
    train_parts, test_parts = [], []
    for c in range(int(labels.max()) + 1):
        nodes = np.flatnonzero(labels == c)
        picked = rng.choice(nodes, size=train_per_class + test_per_class, replace=False)
        train_parts.append(picked[:train_per_class])
        test_parts.append(picked[train_per_class:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def generate_case1(seed: int = 0, spec: SyntheticSpec | None = None) -> LabeledDataset:
    """Random topology with class-informative Gaussian features.

    900 nodes with uniform edge probability 0.03; labels are a random
    balanced assignment (300 per class); features are drawn per class from
    unit-covariance Gaussians whose centers sit pairwise 10 apart, so the
    labels are recoverable from features but not from topology. RNG draw
    order: edges, labels, features, split.
    """
    spec = spec or SyntheticSpec(CASE_GAUSSIAN)
    rng = np.random.default_rng(seed)
    graph = SparseGraph.from_edges(spec.n, _bernoulli_edges(rng, spec.n, spec.p_uniform))
    per = spec.n // spec.n_classes
    labels = rng.permutation(np.repeat(np.arange(spec.n_classes), per))
    centers = _simplex_centers(spec.n_classes, spec.n_features, spec.center_separation)
    features = centers[labels] + rng.standard_normal((spec.n, spec.n_features))
    train_idx, test_idx = _per_class_split(rng, labels, spec.train_per_class, spec.test_per_class)
    return LabeledDataset(graph, features, labels, train_idx, test_idx)


def generate_case2(seed: int = 0, spec: SyntheticSpec | None = None) -> LabeledDataset:
    """Community topology with uninformative Gaussian features.

    900 nodes in three contiguous blocks (0-299, 300-599, 600-899) wired by a
    stochastic block model (intra 0.03, inter 0.0015); features are iid
    standard normal; labels equal the block id. RNG draw order: edges,
    features, split.
    """
    spec = spec or SyntheticSpec(CASE_SBM)
    rng = np.random.default_rng(seed)
    per = spec.n // spec.n_classes
    block = np.repeat(np.arange(spec.n_classes), per)
    iu, ju = np.triu_indices(spec.n, k=1)
    probs = np.where(block[iu] == block[ju], spec.p_intra, spec.p_inter)
    keep = rng.random(iu.size) < probs
    graph = SparseGraph.from_edges(spec.n, np.column_stack([iu[keep], ju[keep]]))
    features = rng.standard_normal((spec.n, spec.n_features))
    labels = block.copy()
    train_idx, test_idx = _per_class_split(rng, labels, spec.train_per_class, spec.test_per_class)
    return LabeledDataset(graph, features, labels, train_idx, test_idx)


def save_dataset(dataset: LabeledDataset, out_dir) -> None:
    """Write the dataset directory; output is byte-identical for equal input."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w", newline="\n") as f:
        for i, j in dataset.graph.edge_list():
            f.write(f"{i}\t{j}\n")
    with open(out / "features.csv", "w", newline="\n") as f:
        for row in dataset.features:
            f.write(",".join("%.17g" % v for v in row))
            f.write("\n")
    with open(out / "labels.tsv", "w", newline="\n") as f:
        for i, y in enumerate(dataset.labels):
            f.write(f"{i}\t{y}\n")
    with open(out / "split.json", "w", newline="\n") as f:
        json.dump(
            {"train": dataset.train_idx.tolist(), "test": dataset.test_idx.tolist()},
            f,
            sort_keys=True,
        )
        f.write("\n")


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DatasetFormatError("missing-file", f"required file not found: {path}")
    return path


def _load_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise DatasetFormatError(
                    "ragged-features",
                    f"{path}:{line_no} has {len(parts)} columns, expected {width}",
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DatasetFormatError("parse-error", f"{path}:{line_no} is not numeric") from None
    if not rows:
        raise DatasetFormatError("parse-error", f"{path} contains no feature rows")
    return np.asarray(rows, dtype=np.float64)


def _load_int_table(path: Path, n_cols: int) -> np.ndarray:
    rows = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != n_cols:
                raise DatasetFormatError(
                    "parse-error", f"{path}:{line_no} has {len(parts)} fields, expected {n_cols}"
                )
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise DatasetFormatError("parse-error", f"{path}:{line_no} is not integral") from None
    return np.asarray(rows, dtype=np.int64).reshape(-1, n_cols)


def _load_labels(path: Path, n: int) -> np.ndarray:
    table = _load_int_table(path, 2)
    node_ids, class_ids = table[:, 0], table[:, 1]
    if node_ids.size and (node_ids.min() < 0 or node_ids.max() >= n):
        raise DatasetFormatError("index-out-of-range", f"{path}: node id outside [0, {n})")
    if np.unique(node_ids).size != node_ids.size:
        raise DatasetFormatError("duplicate-label", f"{path}: a node is labeled more than once")
    if node_ids.size != n:
        raise DatasetFormatError("label-missing", f"{path}: {n - node_ids.size} node(s) unlabeled")
    labels = np.empty(n, dtype=np.int64)
    labels[node_ids] = class_ids
    present = np.unique(labels)
    if present.min() < 0:
        raise DatasetFormatError("index-out-of-range", f"{path}: negative class id")
    if present[0] != 0 or not np.array_equal(present, np.arange(present.size)):
        raise DatasetFormatError(
            "label-gap", f"{path}: class ids must cover 0..C-1 without gaps (found {present.tolist()})"
        )
    return labels


def _load_split(path: Path, n: int) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError("parse-error", f"{path}: {exc}") from None
    try:
        train = np.asarray(payload["train"], dtype=np.int64)
        test = np.asarray(payload["test"], dtype=np.int64)
    except (KeyError, TypeError, ValueError):
        raise DatasetFormatError("parse-error", f"{path}: expected train/test index arrays") from None
    for name, idx in (("train", train), ("test", test)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DatasetFormatError("index-out-of-range", f"{path}: {name} index outside [0, {n})")
    if np.intersect1d(train, test).size:
        raise DatasetFormatError("split-overlap", f"{path}: train and test sets intersect")
    return train, test


def load_dataset(data_dir) -> LabeledDataset:
    """Load and validate a dataset directory.

    Edges are symmetrized by union and deduplicated; self-loops are dropped
    with a counted DatasetWarning. Malformed input raises DatasetFormatError
    with a distinct code per failure class.
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise DatasetFormatError("missing-file", f"dataset directory not found: {root}")
    features = _load_features(_require(root / "features.csv"))
    n = features.shape[0]
    labels = _load_labels(_require(root / "labels.tsv"), n)
    edges = _load_int_table(_require(root / "edges.tsv"), 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise DatasetFormatError("index-out-of-range", f"edges.tsv: endpoint outside [0, {n})")
    self_loops = edges[:, 0] == edges[:, 1]
    dropped = int(self_loops.sum())
    if dropped:
        warnings.warn(f"dropped {dropped} self-loop edge(s)", DatasetWarning, stacklevel=2)
        edges = edges[~self_loops]
    graph = SparseGraph.from_edges(n, edges)
    split_path = root / "split.json"
    if split_path.is_file():
        train_idx, test_idx = _load_split(split_path, n)
    else:
        train_idx = np.empty(0, dtype=np.int64)
        test_idx = np.empty(0, dtype=np.int64)
    dataset = LabeledDataset(graph, features, labels, train_idx, test_idx)
    dataset.validate()
    return dataset


def make_split(
    dataset: LabeledDataset,
    labels_per_class: int,
    test_size: int = 1000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly draw ``labels_per_class`` training nodes per class, then
    ``test_size`` test nodes from the remaining pool; the sets are disjoint."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(dataset.labels)
    train_parts = []
    for c in range(dataset.n_classes):
        nodes = np.flatnonzero(labels == c)
        if nodes.size < labels_per_class:
            raise ValueError(f"class {c} has only {nodes.size} nodes; {labels_per_class} requested")
        train_parts.append(rng.choice(nodes, size=labels_per_class, replace=False))
    train_idx = np.sort(np.concatenate(train_parts))
    rest = np.setdiff1d(np.arange(dataset.n), train_idx)
    if rest.size < test_size:
        raise ValueError(f"only {rest.size} nodes left for a test set of {test_size}")
    test_idx = np.sort(rng.choice(rest, size=test_size, replace=False))
    return train_idx, test_idx


def with_split(dataset: LabeledDataset, train_idx: np.ndarray, test_idx: np.ndarray) -> LabeledDataset:
    """Copy of the dataset with a different split attached."""
    return replace(dataset, train_idx=np.asarray(train_idx), test_idx=np.asarray(test_idx))
