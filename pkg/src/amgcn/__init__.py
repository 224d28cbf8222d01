"""Adaptive multi-channel graph convolutional network for semi-supervised
node classification, with hand-derived gradients on plain numpy arrays."""

from .graphs import (
    NormalizedAdjacency,
    SimilarityMetric,
    SparseGraph,
    build_knn_graph,
    cosine_similarity,
    heat_kernel_similarity,
    normalize_adjacency,
    spmm,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    consistency_loss,
    cross_entropy,
    disparity_loss,
    hsic,
    total_loss,
)
from .model import (
    AttentionParams,
    ClassifierParams,
    ForwardState,
    GcnChannelParams,
    ModelInputs,
    ModelParams,
    attention_fuse,
    channel_forward,
    classify,
    common_forward,
    full_forward,
    gcn_layer,
    init_params,
)
from .data import (
    DatasetFormatError,
    LabeledDataset,
    SyntheticSpec,
    generate_case1,
    generate_case2,
    load_dataset,
    make_split,
    save_dataset,
    with_split,
)
from .metrics import MetricsReport, accuracy, macro_f1
from .training import (
    AdamState,
    TrainConfig,
    TrainHistory,
    TrainingDiverged,
    adam_step,
    backward,
    finite_difference_check,
    prepare_inputs,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .presets import case1_config, case2_config

__version__ = "0.1.0"
