"""Disjoint-union batching of featurized graphs.

Graphs are stacked block-diagonally: node and arc arrays are concatenated,
arc endpoints are shifted by each graph's node offset, and sparse pooling
matrices map node rows back to graph (and optionally fragment) rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..chem.features import FeaturizedGraph
from ..errors import PartitionMismatch


@dataclass
class GraphBatch:
    node_codes: np.ndarray   # (n_nodes, n_node_features)
    edge_codes: np.ndarray   # (n_arcs, n_edge_features)
    src: np.ndarray          # (n_arcs,)
    dst: np.ndarray          # (n_arcs,)
    graph_of_node: np.ndarray
    n_graphs: int
    feature_set: str
    fragment_of_node: np.ndarray | None = None
    n_fragments: int = 0

    @property
    def n_nodes(self) -> int:
        return self.node_codes.shape[0]

    @property
    def n_arcs(self) -> int:
        return self.src.shape[0]

    def scatter_matrix(self, dtype) -> sp.csr_matrix:
        """(n_nodes, n_arcs) matrix summing arc rows into their target nodes."""
        return sp.csr_matrix((np.ones(self.n_arcs, dtype=dtype), (self.dst, np.arange(self.n_arcs))),
                             shape=(self.n_nodes, self.n_arcs))

    def gather_matrix(self, dtype) -> sp.csr_matrix:
        """(n_nodes, n_arcs) matrix summing arc rows back into their source nodes."""
        return sp.csr_matrix((np.ones(self.n_arcs, dtype=dtype), (self.src, np.arange(self.n_arcs))),
                             shape=(self.n_nodes, self.n_arcs))


def mean_pool_matrix(group_of_node: np.ndarray, n_groups: int, dtype) -> sp.csr_matrix:
    """(n_groups, n_nodes) matrix whose row g averages the nodes of group g."""
    counts = np.bincount(group_of_node, minlength=n_groups).astype(dtype)
    if np.any(counts == 0):
        raise PartitionMismatch("every pooling group needs at least one node")
    n = group_of_node.shape[0]
    return sp.csr_matrix((1.0 / counts[group_of_node], (group_of_node, np.arange(n))), shape=(n_groups, n))


def collate(graphs: Sequence[FeaturizedGraph], assignments: Sequence[Sequence[int]] | None = None) -> GraphBatch:
    """Stack graphs (and optional per-graph fragment assignments) into one batch.

    Fragment ids of graph ``g`` are offset by the fragment count of graphs
    ``0..g-1`` so every fragment row in the batch is unique.
    """
    if not graphs:
        raise ValueError("cannot collate an empty list of graphs")
    feature_sets = {g.feature_set for g in graphs}
    if len(feature_sets) != 1:
        raise ValueError(f"mixed feature sets in one batch: {sorted(feature_sets)}")
    sizes = np.array([g.n_atoms for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    arcs = [g.arcs + off for g, off in zip(graphs, offsets)]
    src = np.concatenate([a[:, 0] for a in arcs]).astype(np.int64)
    dst = np.concatenate([a[:, 1] for a in arcs]).astype(np.int64)
    batch = GraphBatch(
        node_codes=np.concatenate([g.node_codes for g in graphs]),
        edge_codes=np.concatenate([g.edge_codes for g in graphs]),
        src=src,
        dst=dst,
        graph_of_node=np.repeat(np.arange(len(graphs), dtype=np.int64), sizes),
        n_graphs=len(graphs),
        feature_set=graphs[0].feature_set,
    )
    if assignments is not None:
        if len(assignments) != len(graphs):
            raise PartitionMismatch(f"{len(assignments)} fragment maps for {len(graphs)} graphs")
        parts, shift = [], 0
        for g, assign in zip(graphs, assignments):
            assign = np.asarray(assign, dtype=np.int64)
            if assign.shape != (g.n_atoms,):
                raise PartitionMismatch(f"fragment map covers {assign.shape[0]} atoms, graph has {g.n_atoms}")
            n_frag = int(assign.max()) + 1 if assign.size else 0
            if assign.size and (assign.min() < 0 or np.bincount(assign).min() == 0):
                raise PartitionMismatch("fragment ids must be contiguous from 0")
            parts.append(assign + shift)
            shift += n_frag
        batch.fragment_of_node = np.concatenate(parts)
        batch.n_fragments = shift
    return batch
