"""GIN encoder, projection and prediction heads with hand-written backprop.

One layer of the encoder is::

    a_v = sum_{u in N(v)} relu(h_u + e_uv)
    h_v' = W2 relu(W1 (h_v + a_v) + b1) + b2

followed by a ReLU on every layer except the last. ``h^0`` is the sum of one
embedding row per node feature and ``e_uv`` the sum of one row per edge
feature; the edge tables are shared by all layers. Heads are two affine maps
with a ReLU between them.

Parameters live in a flat ordered dict so the optimizer, the checkpoint
writer and the gradient checker can all walk them in one fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..chem.features import FeaturizedGraph, edge_features, node_features
from ..errors import CodeOutOfVocab, PartitionMismatch, TraceMismatch
from .batch import GraphBatch, collate, mean_pool_matrix

HEADS = ("proj", "fproj", "pred")
# fixed input standardization of the prediction head, never updated by the optimizer
BUFFERS = frozenset({"pred.in_mean", "pred.in_scale"})
NORM_EPS = 1e-5


@dataclass
class GinModel:
    params: dict[str, np.ndarray]
    feature_set: str
    d: int
    d_h: int
    d_z: int
    n_layers: int
    n_targets: int = 0

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    @property
    def node_feature_names(self) -> list[str]:
        return [f.name for f in node_features(self.feature_set)]

    @property
    def edge_feature_names(self) -> list[str]:
        return [f.name for f in edge_features(self.feature_set)]

    def encoder_keys(self) -> list[str]:
        return [k for k in self.params if k.startswith(("node_emb.", "edge_emb.", "gin."))]

    def head_keys(self, head: str) -> list[str]:
        return [k for k in self.params if k.startswith(head + ".") and k not in BUFFERS]

    def trainable_keys(self) -> list[str]:
        return [k for k in self.params if k not in BUFFERS]

    def astype(self, dtype) -> "GinModel":
        params = {k: v.astype(dtype) for k, v in self.params.items()}
        return GinModel(params, self.feature_set, self.d, self.d_h, self.d_z, self.n_layers, self.n_targets)

    def copy(self) -> "GinModel":
        return self.astype(self.dtype)

    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def _xavier(rng, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def head_params(rng, prefix, d_in, d_hidden, d_out, dtype):
    return {
        f"{prefix}.w1": _xavier(rng, d_in, d_hidden, dtype),
        f"{prefix}.b1": np.zeros(d_hidden, dtype=dtype),
        f"{prefix}.w2": _xavier(rng, d_hidden, d_out, dtype),
        f"{prefix}.b2": np.zeros(d_out, dtype=dtype),
    }


def init_model(feature_set: str = "original", d: int = 512, d_z: int = 256, n_layers: int = 5,
               seed: int = 0, dtype=np.float32, d_h: int | None = None) -> GinModel:
    """Random model with Xavier-uniform affine maps and N(0, 0.1) embeddings.

    Args:
        feature_set: ``"original"`` or ``"extended"``; fixes the embedding tables.
        d: Node representation width.
        d_z: Latent width of the projection head.
        n_layers: Number of GIN layers K.
        seed: Seed of the generator used for every tensor.
        dtype: ``np.float32`` for training, ``np.float64`` for gradient checks.
        d_h: Hidden width of the projection head; defaults to ``d``.
    """
    rng = np.random.default_rng(seed)
    d_h = d if d_h is None else d_h
    params: dict[str, np.ndarray] = {}
    for f in node_features(feature_set):
        params[f"node_emb.{f.name}"] = rng.normal(0.0, 0.1, size=(f.vocab_size, d)).astype(dtype)
    for f in edge_features(feature_set):
        params[f"edge_emb.{f.name}"] = rng.normal(0.0, 0.1, size=(f.vocab_size, d)).astype(dtype)
    for k in range(n_layers):
        params[f"gin.{k}.w1"] = _xavier(rng, d, 2 * d, dtype)
        params[f"gin.{k}.b1"] = np.zeros(2 * d, dtype=dtype)
        params[f"gin.{k}.w2"] = _xavier(rng, 2 * d, d, dtype)
        params[f"gin.{k}.b2"] = np.zeros(d, dtype=dtype)
    params.update(head_params(rng, "proj", d, d_h, d_z, dtype))
    return GinModel(params, feature_set, d, d_h, d_z, n_layers)


def attach_prediction_head(model: GinModel, n_targets: int, seed: int = 0) -> GinModel:
    """Copy of ``model`` without the projection head and with a fresh prediction head."""
    rng = np.random.default_rng(seed)
    params = {k: v.copy() for k, v in model.params.items() if not k.startswith(HEADS)}
    params.update(head_params(rng, "pred", model.d, model.d, n_targets, model.dtype))
    return GinModel(params, model.feature_set, model.d, model.d_h, model.d_z, model.n_layers, n_targets)


def set_head_input_norm(model: GinModel, x: np.ndarray) -> None:
    """Standardize prediction-head inputs with the mean and variance of ``x``.

    The statistics are stored as buffers and stay fixed during training.
    """
    x = np.asarray(x, dtype=np.float64)
    model.params["pred.in_mean"] = x.mean(axis=0).astype(model.dtype)
    model.params["pred.in_scale"] = (1.0 / np.sqrt(x.var(axis=0) + NORM_EPS)).astype(model.dtype)


def as_batch(graphs) -> GraphBatch:
    if isinstance(graphs, GraphBatch):
        return graphs
    if isinstance(graphs, FeaturizedGraph):
        return collate([graphs])
    return collate(list(graphs))


# --- forward -----------------------------------------------------------------

@dataclass
class LayerCache:
    h_in: np.ndarray
    pre: np.ndarray   # h[src] + e, per arc
    m: np.ndarray     # h + a
    u1: np.ndarray
    r1: np.ndarray
    u2: np.ndarray


@dataclass
class EncoderTrace:
    batch: GraphBatch
    e: np.ndarray
    layers: list[LayerCache] = field(default_factory=list)


@dataclass
class HeadCache:
    head: str
    x: np.ndarray
    u: np.ndarray
    r: np.ndarray


@dataclass
class Branch:
    pool: object          # (rows, n_nodes) sparse mean-pooling matrix
    head: HeadCache | None


@dataclass
class ForwardTrace:
    """Everything :func:`backward` needs, tied to the model it came from."""

    model_id: int
    encoder: EncoderTrace
    branches: dict[str, Branch]


def _check_codes(model: GinModel, codes: np.ndarray, names: list[str], prefix: str):
    for col, name in enumerate(names):
        vocab = model.params[f"{prefix}.{name}"].shape[0]
        column = codes[:, col]
        if column.size and (column.min() < 0 or column.max() >= vocab):
            bad = int(column[(column < 0) | (column >= vocab)][0])
            raise CodeOutOfVocab(f"{name} code {bad} outside vocabulary of size {vocab}")


def _embed(model: GinModel, codes: np.ndarray, names: list[str], prefix: str, n_rows: int) -> np.ndarray:
    out = np.zeros((n_rows, model.d), dtype=model.dtype)
    for col, name in enumerate(names):
        out += model.params[f"{prefix}.{name}"][codes[:, col]]
    return out


def encode(model: GinModel, graphs) -> tuple[np.ndarray, EncoderTrace]:
    """Final node states ``h^K`` for a graph, list of graphs or batch."""
    batch = as_batch(graphs)
    if batch.feature_set != model.feature_set:
        raise CodeOutOfVocab(f"graph uses feature set {batch.feature_set!r}, model {model.feature_set!r}")
    _check_codes(model, batch.node_codes, model.node_feature_names, "node_emb")
    _check_codes(model, batch.edge_codes, model.edge_feature_names, "edge_emb")
    p = model.params
    h = _embed(model, batch.node_codes, model.node_feature_names, "node_emb", batch.n_nodes)
    e = _embed(model, batch.edge_codes, model.edge_feature_names, "edge_emb", batch.n_arcs)
    scatter = batch.scatter_matrix(np.float64)
    trace = EncoderTrace(batch, e)
    for k in range(model.n_layers):
        pre = h[batch.src] + e
        m = h + _reduce(scatter, np.maximum(pre, 0))
        u1 = m @ p[f"gin.{k}.w1"] + p[f"gin.{k}.b1"]
        r1 = np.maximum(u1, 0)
        u2 = r1 @ p[f"gin.{k}.w2"] + p[f"gin.{k}.b2"]
        trace.layers.append(LayerCache(h, pre, m, u1, r1, u2))
        h = u2 if k == model.n_layers - 1 else np.maximum(u2, 0)
    return h, trace


def _reduce(mat, x: np.ndarray) -> np.ndarray:
    """``mat @ x`` accumulated in float64 and rounded once to ``x.dtype``.

    Sums over neighbours and pools then do not depend on atom or arc order
    beyond that final rounding.
    """
    return np.asarray(mat @ x.astype(np.float64, copy=False)).astype(x.dtype, copy=False)


def graph_pool(batch: GraphBatch, dtype=np.float64):
    return mean_pool_matrix(batch.graph_of_node, batch.n_graphs, dtype)


def fragment_pool(batch: GraphBatch, dtype=np.float64):
    if batch.fragment_of_node is None:
        raise TraceMismatch("batch was collated without fragment maps")
    return mean_pool_matrix(batch.fragment_of_node, batch.n_fragments, dtype)


def readout_graph(h: np.ndarray, graphs) -> np.ndarray:
    """Mean of node states per graph: ``(n_graphs, d)``, or ``(d,)`` for a single graph."""
    single = isinstance(graphs, FeaturizedGraph)
    batch = as_batch(graphs)
    out = _reduce(graph_pool(batch), h)
    return out[0] if single else out


def readout_fragments(h: np.ndarray, graphs, fragment_map=None) -> np.ndarray:
    """Mean of node states per fragment row.

    With a single graph, pass its :class:`FragmentMap` (or raw assignment).
    """
    if fragment_map is not None:
        assign = np.asarray(getattr(fragment_map, "assignment", fragment_map), dtype=np.int64)
        if assign.shape[0] != h.shape[0]:
            raise PartitionMismatch(f"fragment map covers {assign.shape[0]} atoms, got {h.shape[0]} node states")
        n = int(assign.max()) + 1 if assign.size else 0
        return _reduce(mean_pool_matrix(assign, n, np.float64), h)
    return _reduce(fragment_pool(as_batch(graphs)), h)


def head_forward(model: GinModel, head: str, x: np.ndarray) -> tuple[np.ndarray, HeadCache]:
    p = model.params
    if f"{head}.w1" not in p:
        raise TraceMismatch(f"model has no {head!r} head")
    if f"{head}.in_mean" in p:
        x = (x - p[f"{head}.in_mean"]) * p[f"{head}.in_scale"]
    u = x @ p[f"{head}.w1"] + p[f"{head}.b1"]
    r = np.maximum(u, 0)
    return r @ p[f"{head}.w2"] + p[f"{head}.b2"], HeadCache(head, x, u, r)


def project(model: GinModel, x: np.ndarray) -> np.ndarray:
    """Latent vectors z from graph or fragment representations."""
    return head_forward(model, "proj", x)[0]


def predict(model: GinModel, x: np.ndarray) -> np.ndarray:
    """Prediction head outputs (logits for classification targets)."""
    return head_forward(model, "pred", x)[0]


def forward(model: GinModel, graphs, branches: Sequence[str] = ("mol",), head: str | dict | None = "proj"):
    """Encode once and run each requested branch through ``head``.

    ``"mol"`` pools per graph and ``"frag"`` per fragment. ``head`` names one
    head for every branch or maps branch names to heads; ``None`` returns the
    pooled representations themselves.

    Returns:
        (outputs keyed by branch name, ForwardTrace)
    """
    batch = as_batch(graphs)
    h, enc = encode(model, batch)
    outputs, traced = {}, {}
    for name in branches:
        pool = graph_pool(batch) if name == "mol" else fragment_pool(batch)
        pooled = _reduce(pool, h)
        name_head = head.get(name) if isinstance(head, dict) else head
        if name_head is None:
            outputs[name], cache = pooled, None
        else:
            outputs[name], cache = head_forward(model, name_head, pooled)
        traced[name] = Branch(pool, cache)
    return outputs, ForwardTrace(id(model), enc, traced)


# --- backward ----------------------------------------------------------------

def head_backward(model: GinModel, cache: HeadCache, dy: np.ndarray, grads: dict) -> np.ndarray:
    p, hd = model.params, cache.head
    grads[f"{hd}.w2"] += cache.r.T @ dy
    grads[f"{hd}.b2"] += dy.sum(axis=0)
    du = (dy @ p[f"{hd}.w2"].T) * (cache.u > 0)
    grads[f"{hd}.w1"] += cache.x.T @ du
    grads[f"{hd}.b1"] += du.sum(axis=0)
    dx = du @ p[f"{hd}.w1"].T
    if f"{hd}.in_scale" in p:
        dx = dx * p[f"{hd}.in_scale"]
    return dx


def _embed_backward(grads: dict, codes: np.ndarray, names: list[str], prefix: str, upstream: np.ndarray):
    for col, name in enumerate(names):
        np.add.at(grads[f"{prefix}.{name}"], codes[:, col], upstream)


def _encoder_backward(model: GinModel, trace: EncoderTrace, dh: np.ndarray, grads: dict):
    p, batch = model.params, trace.batch
    scatter = batch.scatter_matrix(np.float64)
    gather = batch.gather_matrix(np.float64)
    de = np.zeros_like(trace.e)
    for k in reversed(range(model.n_layers)):
        c = trace.layers[k]
        du2 = dh if k == model.n_layers - 1 else dh * (c.u2 > 0)
        grads[f"gin.{k}.w2"] += c.r1.T @ du2
        grads[f"gin.{k}.b2"] += du2.sum(axis=0)
        du1 = (du2 @ p[f"gin.{k}.w2"].T) * (c.u1 > 0)
        grads[f"gin.{k}.w1"] += c.m.T @ du1
        grads[f"gin.{k}.b1"] += du1.sum(axis=0)
        dm = du1 @ p[f"gin.{k}.w1"].T
        dpre = _reduce(scatter.T, dm) * (c.pre > 0)
        de += dpre
        dh = dm + _reduce(gather, dpre)
    _embed_backward(grads, batch.edge_codes, model.edge_feature_names, "edge_emb", de)
    _embed_backward(grads, batch.node_codes, model.node_feature_names, "node_emb", dh)


def zero_grads(model: GinModel, keys=None) -> dict[str, np.ndarray]:
    keys = model.params if keys is None else keys
    return {k: np.zeros_like(model.params[k]) for k in keys}


def backward(model: GinModel, trace: ForwardTrace, upstream: dict[str, np.ndarray],
             encoder: bool = True) -> dict[str, np.ndarray]:
    """Exact gradients of ``sum(upstream[b] * outputs[b])`` for every parameter.

    Args:
        model: The model the trace was produced with.
        trace: Result of :func:`forward`.
        upstream: Gradient w.r.t. each branch output, keyed like the outputs.
        encoder: If False, stop at the pooled representations (head-only training).

    Returns:
        Gradient per parameter name; parameters not reached are zero.
    """
    if trace.model_id != id(model):
        raise TraceMismatch("trace was produced by a different model")
    unknown = set(upstream) - set(trace.branches)
    if unknown:
        raise TraceMismatch(f"no forward branch for upstream gradient(s) {sorted(unknown)}")
    grads = zero_grads(model)
    dh = np.zeros((trace.encoder.batch.n_nodes, model.d), dtype=model.dtype)
    for name, dy in upstream.items():
        branch = trace.branches[name]
        expected = branch.pool.shape[0]
        if dy.shape[0] != expected:
            raise TraceMismatch(f"upstream {name!r} has {dy.shape[0]} rows, forward produced {expected}")
        dy = np.asarray(dy, dtype=model.dtype)
        dx = dy if branch.head is None else head_backward(model, branch.head, dy, grads)
        if encoder:
            dh += _reduce(branch.pool.T, dx)
    if encoder:
        _encoder_backward(model, trace.encoder, dh, grads)
    return grads
