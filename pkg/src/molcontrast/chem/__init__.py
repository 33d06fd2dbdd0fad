"""SMILES parsing, ring perception and featurisation."""

from .features import (
    EDGE_FEATURES,
    FEATURE_SETS,
    NODE_FEATURES,
    FeaturizedGraph,
    edge_features,
    featurize,
    node_features,
    vocab_sizes,
)
from .graph import Atom, Bond, MolGraph, induced_subgraph
from .rings import sssr
from .smiles import assign_hydrogens, parse_smiles, read_smiles_file
from .writer import canonical_ranks, canonical_smiles, to_smiles, write_smiles


def perceive_rings(mol: MolGraph) -> list[frozenset]:
    """SSSR of ``mol`` (recomputed from its bonds)."""
    return sssr(mol.n_atoms, [(b.a, b.b) for b in mol.bonds])


__all__ = [
    "Atom", "Bond", "MolGraph", "induced_subgraph", "FeaturizedGraph", "FEATURE_SETS", "NODE_FEATURES", "EDGE_FEATURES",
    "parse_smiles", "read_smiles_file", "assign_hydrogens", "perceive_rings", "featurize",
    "node_features", "edge_features", "vocab_sizes", "to_smiles", "write_smiles",
    "canonical_smiles", "canonical_ranks", "sssr",
]
