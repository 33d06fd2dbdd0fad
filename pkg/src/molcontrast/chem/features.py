"""Integer feature codes for atoms and directed bonds.

Every feature owns a small vocabulary plus one reserved mask code. The
``atomic`` feature codes an element by its atomic number, which leaves 0 free
as its mask code; every other feature codes values by position in its value
list and reserves the next integer for the mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FeatureOutOfRange
from .graph import BOND_DIRECTIONS, BOND_ORDERS, BOND_STEREO, CHIRALITY, HYBRIDIZATIONS, Atom, Bond, MolGraph

FEATURE_SETS = ("original", "extended")


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple
    mask_code: int

    @property
    def vocab_size(self) -> int:
        return 120 if self.name == "atomic" else len(self.values) + 1

    def code(self, value) -> int:
        if self.name == "atomic":
            if not 1 <= value <= 119:
                raise FeatureOutOfRange(f"atomic number {value} outside 1..119")
            return int(value)
        try:
            return self.values.index(value)
        except ValueError:
            raise FeatureOutOfRange(f"{self.name}={value!r} outside {self.values}") from None


ATOMIC = Feature("atomic", tuple(range(1, 120)), 0)
NODE_FEATURES = {
    "atomic": ATOMIC,
    "chirality": Feature("chirality", CHIRALITY, len(CHIRALITY)),
    "degree": Feature("degree", tuple(range(0, 11)), 11),
    "charge": Feature("charge", tuple(range(-5, 6)), 11),
    "hybridization": Feature("hybridization", HYBRIDIZATIONS, len(HYBRIDIZATIONS)),
    "aromatic": Feature("aromatic", (False, True), 2),
    "hydrogen": Feature("hydrogen", tuple(range(0, 6)), 6),
}
EDGE_FEATURES = {
    "bond_type": Feature("bond_type", BOND_ORDERS, len(BOND_ORDERS)),
    "bond_dir": Feature("bond_dir", BOND_DIRECTIONS, len(BOND_DIRECTIONS)),
    "stereo": Feature("stereo", BOND_STEREO, len(BOND_STEREO)),
}
_NODE_NAMES = {
    "original": ("atomic", "chirality"),
    "extended": ("atomic", "chirality", "degree", "charge", "hybridization", "aromatic", "hydrogen"),
}
_EDGE_NAMES = {
    "original": ("bond_type", "bond_dir"),
    "extended": ("bond_type", "bond_dir", "stereo"),
}


def node_features(feature_set: str) -> list[Feature]:
    return [NODE_FEATURES[n] for n in _NODE_NAMES[_check(feature_set)]]


def edge_features(feature_set: str) -> list[Feature]:
    return [EDGE_FEATURES[n] for n in _EDGE_NAMES[_check(feature_set)]]


def vocab_sizes(feature_set: str) -> tuple[list[int], list[int]]:
    return ([f.vocab_size for f in node_features(feature_set)],
            [f.vocab_size for f in edge_features(feature_set)])


def _check(feature_set: str) -> str:
    if feature_set not in FEATURE_SETS:
        raise ValueError(f"feature_set must be one of {FEATURE_SETS}, got {feature_set!r}")
    return feature_set


def _atom_value(atom: Atom, name: str):
    return {
        "atomic": atom.atomic_number,
        "chirality": atom.chirality,
        "degree": atom.degree,
        "charge": atom.formal_charge,
        "hybridization": atom.hybridization,
        "aromatic": atom.aromatic,
        "hydrogen": atom.total_h,
    }[name]


def _bond_value(bond: Bond, name: str):
    return {"bond_type": bond.order, "bond_dir": bond.direction, "stereo": bond.stereo}[name]


@dataclass
class FeaturizedGraph:
    """Encoder input. Arcs ``2k`` and ``2k+1`` are the two directions of bond ``k``.

    Arrays are treated as read-only; augmentation builds new instances.
    """

    node_codes: np.ndarray  # (n_atoms, n_node_features) int64
    edge_codes: np.ndarray  # (n_arcs, n_edge_features) int64
    arcs: np.ndarray        # (n_arcs, 2) int64, columns (source, target)
    arc_bond: np.ndarray    # (n_arcs,) parent bond index
    feature_set: str
    masked: np.ndarray      # (n_atoms,) bool

    @property
    def n_atoms(self) -> int:
        return self.node_codes.shape[0]

    @property
    def n_arcs(self) -> int:
        return self.arcs.shape[0]


def featurize(mol: MolGraph, feature_set: str = "original") -> FeaturizedGraph:
    nfeats = node_features(feature_set)
    efeats = edge_features(feature_set)
    node_codes = np.array(
        [[f.code(_atom_value(atom, f.name)) for f in nfeats] for atom in mol.atoms], dtype=np.int64
    ).reshape(mol.n_atoms, len(nfeats))
    bond_codes = [[f.code(_bond_value(b, f.name)) for f in efeats] for b in mol.bonds]
    edge_codes = np.array([row for row in bond_codes for _ in (0, 1)], dtype=np.int64).reshape(-1, len(efeats))
    arcs = np.array([pair for b in mol.bonds for pair in ((b.a, b.b), (b.b, b.a))], dtype=np.int64).reshape(-1, 2)
    arc_bond = np.repeat(np.arange(len(mol.bonds), dtype=np.int64), 2)
    return FeaturizedGraph(node_codes, edge_codes, arcs, arc_bond, feature_set,
                           np.zeros(mol.n_atoms, dtype=bool))
