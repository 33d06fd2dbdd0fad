"""Bemis-Murcko scaffolds used as scaffold-split keys."""

from __future__ import annotations

from ..chem.graph import MolGraph, induced_subgraph
from ..chem.writer import canonical_smiles


def scaffold_atoms(mol: MolGraph) -> list[int]:
    """Atoms left after repeatedly pruning degree-1 atoms that are not in a ring."""
    alive = set(range(mol.n_atoms))
    degree = [a.degree for a in mol.atoms]
    leaves = [i for i in alive if degree[i] <= 1 and not mol.atoms[i].in_ring]
    while leaves:
        i = leaves.pop()
        if i not in alive:
            continue
        alive.discard(i)
        for j in mol.neighbors(i):
            if j in alive:
                degree[j] -= 1
                if degree[j] <= 1 and not mol.atoms[j].in_ring:
                    leaves.append(j)
    return sorted(alive)


def murcko_scaffold(mol: MolGraph) -> str:
    """Canonical SMILES of the ring-and-linker core; ``""`` for acyclic molecules.

    Pruned substituents are replaced by hydrogens and stereo is dropped, so
    toluene and benzene share a key.
    """
    if not mol.rings:
        return ""
    core = induced_subgraph(mol, scaffold_atoms(mol))
    return canonical_smiles(core)
