"""BRICS bond cleavage as hand-written environment predicates.

Each environment of the rule table is a local predicate over an atom, its
bonds and its neighbours. A bond is cleaved when it is single and acyclic and
its two ends satisfy one of the table's environment pairs. All matching bonds
are cut at once and the connected components become the fragments; atoms keep
their indices in the parent molecule, no attachment atoms are added.

SMARTS conventions mirrored here: upper-case element = aliphatic,
lower-case = aromatic, ``#n`` = either; ``D`` = number of explicit
neighbours; a bond written without a symbol inside a recursive pattern means
"single or aromatic".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

import numpy as np

from ..chem.graph import MolGraph

_SINGLE_OR_AROMATIC = ("single", "aromatic")


def _nbrs(mol: MolGraph, i: int):
    for j, k in mol.adjacency[i]:
        yield j, mol.bonds[k], mol.atoms[j]


def _aliphatic(mol: MolGraph, i: int, *elements: int) -> bool:
    a = mol.atoms[i]
    return not a.aromatic and a.atomic_number in elements


def _aromatic(mol: MolGraph, i: int, *elements: int) -> bool:
    a = mol.atoms[i]
    return a.aromatic and a.atomic_number in elements


def _has_double(mol: MolGraph, i: int) -> bool:
    return any(b.order == "double" for _, b, _ in _nbrs(mol, i))


def _double_to_aliphatic_o(mol: MolGraph, i: int) -> list[int]:
    return [j for j, b, a in _nbrs(mol, i) if b.order == "double" and a.atomic_number == 8 and not a.aromatic]


def _two_distinct(first: list[int], second: list[int]) -> bool:
    return any(x != y for x in first for y in second)


def _l1(mol, i):
    a = mol.atoms[i]
    if not _aliphatic(mol, i, 6) or a.degree != 3:
        return False
    oxo = _double_to_aliphatic_o(mol, i)
    other = [j for j, b, n in _nbrs(mol, i) if b.order in _SINGLE_OR_AROMATIC and n.atomic_number in (6, 7, 8)]
    return bool(oxo) and bool(other)


def _l3(mol, i):
    if not _aliphatic(mol, i, 8) or mol.atoms[i].degree != 2:
        return False
    return any(b.order == "single" and not b.in_ring and n.atomic_number in (6, 1) for _, b, n in _nbrs(mol, i))


def _l4(mol, i):
    if not _aliphatic(mol, i, 6) or mol.atoms[i].degree == 1 or _has_double(mol, i):
        return False
    return any(b.order == "single" and not b.in_ring and n.atomic_number == 6 for _, b, n in _nbrs(mol, i))


def _lactam_n(mol, i):
    """``[N;R]@[C;R]=O``"""
    if not mol.atoms[i].in_ring:
        return False
    for j, b, n in _nbrs(mol, i):
        if b.in_ring and _aliphatic(mol, j, 6) and n.in_ring and _double_to_aliphatic_o(mol, j):
            return True
    return False


def _l5(mol, i):
    if not _aliphatic(mol, i, 7) or mol.atoms[i].degree == 1 or _has_double(mol, i):
        return False
    if any(b.order == "single" and n.atomic_number not in (6, 16, 1) for _, b, n in _nbrs(mol, i)):
        return False
    return not _lactam_n(mol, i)


def _l6(mol, i):
    a = mol.atoms[i]
    if not _aliphatic(mol, i, 6) or a.degree != 3 or a.in_ring or not _double_to_aliphatic_o(mol, i):
        return False
    return any(b.order == "single" and not b.in_ring and n.atomic_number in (6, 7, 8) for _, b, n in _nbrs(mol, i))


def _l8(mol, i):
    a = mol.atoms[i]
    if not _aliphatic(mol, i, 6) or a.in_ring or a.degree == 1:
        return False
    return all(b.order == "single" for _, b, _ in _nbrs(mol, i))


def _l9(mol, i):
    a = mol.atoms[i]
    if not _aromatic(mol, i, 7) or a.formal_charge != 0:
        return False
    ok = [j for j, b, _ in _nbrs(mol, i) if b.order == "aromatic" and _aromatic(mol, j, 6, 7, 8, 16)]
    return _two_distinct(ok, ok)


def _l10(mol, i):
    a = mol.atoms[i]
    if not _aliphatic(mol, i, 7) or not a.in_ring:
        return False
    ring_nbrs = [j for j, b, _ in _nbrs(mol, i) if b.in_ring]
    acyl = [j for j in ring_nbrs if _aliphatic(mol, j, 6) and _double_to_aliphatic_o(mol, j)]
    other = [j for j in ring_nbrs if _aliphatic(mol, j, 6, 7, 8, 16)]
    return _two_distinct(acyl, other)


def _l11(mol, i):
    if not _aliphatic(mol, i, 16) or mol.atoms[i].degree != 2:
        return False
    return any(b.order == "single" and not b.in_ring and n.atomic_number == 6 for _, b, n in _nbrs(mol, i))


def _l12(mol, i):
    if not _aliphatic(mol, i, 16) or mol.atoms[i].degree != 4:
        return False
    carbon = [j for j, b, n in _nbrs(mol, i) if b.order in _SINGLE_OR_AROMATIC and n.atomic_number == 6]
    return bool(carbon) and len(_double_to_aliphatic_o(mol, i)) >= 2


def _l13(mol, i):
    if not _aliphatic(mol, i, 6):
        return False
    ring_single = [j for j, b, _ in _nbrs(mol, i) if b.order == "single" and b.in_ring]
    first = [j for j in ring_single if _aliphatic(mol, j, 6, 7, 8, 16)]
    second = [j for j in ring_single if _aliphatic(mol, j, 7, 8, 16)]
    return _two_distinct(first, second)


def _l14(mol, i):
    if not _aromatic(mol, i, 6):
        return False
    arom = [j for j, b, _ in _nbrs(mol, i) if b.order == "aromatic"]
    first = [j for j in arom if _aromatic(mol, j, 6, 7, 8, 16)]
    second = [j for j in arom if _aromatic(mol, j, 7, 8, 16)]
    return _two_distinct(first, second)


def _l15(mol, i):
    if not _aliphatic(mol, i, 6):
        return False
    ring_c = [j for j, b, _ in _nbrs(mol, i) if b.order == "single" and b.in_ring and _aliphatic(mol, j, 6)]
    return _two_distinct(ring_c, ring_c)


def _l16(mol, i):
    if not _aromatic(mol, i, 6):
        return False
    arom_c = [j for j, b, _ in _nbrs(mol, i) if b.order == "aromatic" and _aromatic(mol, j, 6)]
    return _two_distinct(arom_c, arom_c)


PREDICATES: dict[str, Callable[[MolGraph, int], bool]] = {
    "L1": _l1, "L3": _l3, "L4": _l4, "L5": _l5, "L6": _l6, "L8": _l8, "L9": _l9, "L10": _l10,
    "L11": _l11, "L12": _l12, "L13": _l13, "L14": _l14, "L15": _l15, "L16": _l16,
}


@dataclass(frozen=True)
class RuleTable:
    version: int
    environments: tuple[str, ...]
    pairs: tuple[tuple[str, str], ...]


@lru_cache(maxsize=None)
def load_rules() -> RuleTable:
    """Read the packaged rule table and check every environment has a predicate."""
    text = resources.files(__package__).joinpath("brics_rules.json").read_text(encoding="utf-8")
    raw = json.loads(text)
    envs = tuple(raw["environments"])
    missing = [e for e in envs if e not in PREDICATES]
    if missing:
        raise RuntimeError(f"rule table names environments without predicates: {missing}")
    pairs = tuple((a, b) for a, b in raw["pairs"])
    for a, b in pairs:
        if a not in envs or b not in envs:
            raise RuntimeError(f"rule pair {a}-{b} refers to an unknown environment")
    return RuleTable(int(raw["version"]), envs, pairs)


def environments(mol: MolGraph) -> list[set[str]]:
    """Environment labels satisfied by each atom."""
    rules = load_rules()
    return [{e for e in rules.environments if PREDICATES[e](mol, i)} for i in range(mol.n_atoms)]


def cleavable_bonds(mol: MolGraph) -> list[int]:
    """Indices of bonds matched by any environment pair, ascending."""
    rules = load_rules()
    env = environments(mol)
    out = []
    for k, bond in enumerate(mol.bonds):
        if bond.order != "single" or bond.in_ring:
            continue
        ea, eb = env[bond.a], env[bond.b]
        if any((x in ea and y in eb) or (x in eb and y in ea) for x, y in rules.pairs):
            out.append(k)
    return out


@dataclass(frozen=True)
class FragmentMap:
    """Partition of a molecule's atoms into fragments.

    Fragment ids are contiguous and numbered in order of each fragment's
    lowest atom index.
    """

    assignment: tuple[int, ...]
    n_fragments: int
    cleaved_bonds: tuple[int, ...]

    def members(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.n_fragments)]
        for atom, frag in enumerate(self.assignment):
            groups[frag].append(atom)
        return groups

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.assignment, dtype=np.int64), minlength=self.n_fragments)


def components(n_atoms: int, edges) -> tuple[int, ...]:
    """Connected-component ids, numbered by lowest member atom."""
    parent = list(range(n_atoms))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    ids: dict[int, int] = {}
    return tuple(ids.setdefault(find(i), len(ids)) for i in range(n_atoms))


def brics_partition(mol: MolGraph) -> FragmentMap:
    """Cut every BRICS-matched bond at once and return the components.

    Example:
        >>> from molcontrast.chem import parse_smiles
        >>> brics_partition(parse_smiles("CCOC(=O)c1ccccc1")).n_fragments
        4
    """
    cut = cleavable_bonds(mol)
    cut_set = set(cut)
    kept = [(b.a, b.b) for k, b in enumerate(mol.bonds) if k not in cut_set]
    assignment = components(mol.n_atoms, kept)
    n = max(assignment) + 1 if assignment else 0
    return FragmentMap(assignment, n, tuple(cut))
