"""Atom masking and bond deletion, the two stochastic views of a molecule."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .chem.features import FeaturizedGraph, node_features
from .chem.graph import MolGraph
from .errors import IndexOutOfRange

MASK_RATE = 0.25
DELETE_RATE = 0.25


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class AugSpec:
    masked_atoms: frozenset
    deleted_bonds: frozenset
    seed: int = 0


def view_seed(batch_seed: int, mol_index: int, view_index: int) -> int:
    """64-bit seed for one view, independent across (batch, molecule, view)."""
    ss = np.random.SeedSequence([batch_seed, mol_index, view_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_augmentation(mol: MolGraph, seed: int, mask_rate: float = MASK_RATE,
                        delete_rate: float = DELETE_RATE) -> AugSpec:
    """Choose round(rate * count) atoms to mask and bonds to delete, uniformly.

    Args:
        mol: Molecule with at least one atom.
        seed: Any non-negative integer; equal seeds give equal specs.
        mask_rate: Fraction of atoms to mask.
        delete_rate: Fraction of bonds to delete.
    """
    rng = np.random.default_rng(seed)
    n_mask = round_half_up(mask_rate * mol.n_atoms)
    n_del = round_half_up(delete_rate * len(mol.bonds))
    masked = rng.choice(mol.n_atoms, size=n_mask, replace=False) if n_mask else []
    deleted = rng.choice(len(mol.bonds), size=n_del, replace=False) if n_del else []
    return AugSpec(frozenset(int(i) for i in masked), frozenset(int(k) for k in deleted), seed)


def apply(fg: FeaturizedGraph, spec: AugSpec) -> FeaturizedGraph:
    """Return a new view: masked atoms carry mask codes, deleted bonds lose both arcs.

    Atom count and indexing are preserved.
    """
    n_bonds = int(fg.arc_bond.max()) + 1 if fg.n_arcs else 0
    for i in spec.masked_atoms:
        if not 0 <= i < fg.n_atoms:
            raise IndexOutOfRange(f"masked atom {i} outside 0..{fg.n_atoms - 1}")
    for k in spec.deleted_bonds:
        if not 0 <= k < n_bonds:
            raise IndexOutOfRange(f"deleted bond {k} outside 0..{n_bonds - 1}")
    node_codes = fg.node_codes.copy()
    masked = fg.masked.copy()
    if spec.masked_atoms:
        rows = np.fromiter(sorted(spec.masked_atoms), dtype=np.int64)
        node_codes[rows] = np.array([f.mask_code for f in node_features(fg.feature_set)], dtype=np.int64)
        masked[rows] = True
    keep = ~np.isin(fg.arc_bond, np.fromiter(spec.deleted_bonds, dtype=np.int64, count=len(spec.deleted_bonds)))
    return replace(fg, node_codes=node_codes, edge_codes=fg.edge_codes[keep], arcs=fg.arcs[keep],
                   arc_bond=fg.arc_bond[keep], masked=masked)
