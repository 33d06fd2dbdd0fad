"""GIN encoder, heads, batching and checkpoints."""

from .batch import GraphBatch, collate, mean_pool_matrix
from .checkpoint import FORMAT_VERSION, atomic_write, load_checkpoint, save_checkpoint
from .model import (ForwardTrace, GinModel, attach_prediction_head, backward, encode, forward, init_model,
                    predict, project, readout_fragments, readout_graph, zero_grads)

__all__ = [
    "FORMAT_VERSION", "ForwardTrace", "GinModel", "GraphBatch", "atomic_write", "attach_prediction_head",
    "backward", "collate", "encode", "forward", "init_model", "load_checkpoint", "mean_pool_matrix",
    "predict", "project", "readout_fragments", "readout_graph", "save_checkpoint", "zero_grads",
]
