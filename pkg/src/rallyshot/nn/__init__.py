from .checkpoint import config_hash, load_checkpoint, restore, save_checkpoint
from .gradcheck import grad_check
from .graph import SkeletonGraph
from .layers import (
    GraphConv,
    LayerNorm,
    Linear,
    Parameter,
    ReLU,
    TemporalConv,
    attention,
    attention_backward,
    attention_forward,
    cosine_similarity,
    cross_entropy,
    graph_conv,
    mean_pool_backward,
    mean_pool_forward,
    softmax,
    xavier,
)
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "GraphConv",
    "LayerNorm",
    "Linear",
    "Parameter",
    "ReLU",
    "SkeletonGraph",
    "TemporalConv",
    "adam_step",
    "attention",
    "attention_backward",
    "attention_forward",
    "config_hash",
    "cosine_similarity",
    "cross_entropy",
    "grad_check",
    "graph_conv",
    "load_checkpoint",
    "mean_pool_backward",
    "mean_pool_forward",
    "restore",
    "save_checkpoint",
    "softmax",
    "xavier",
]
