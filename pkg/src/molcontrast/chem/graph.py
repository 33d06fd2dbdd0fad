"""Immutable molecular graph types."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

from .rings import sssr

ELEMENTS = (
    "*", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga",
    "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd",
    "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm",
    "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os",
    "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa",
    "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg",
    "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
ATOMIC_NUMBER = {sym: z for z, sym in enumerate(ELEMENTS) if z > 0}

CHIRALITY = ("unspecified", "CW", "CCW", "other")
BOND_ORDERS = ("single", "double", "triple", "aromatic")
BOND_DIRECTIONS = ("none", "end_upright", "end_downright")
BOND_STEREO = ("none", "any", "Z", "E", "cis", "trans")
HYBRIDIZATIONS = ("sp", "sp2", "sp3", "sp3d", "sp3d2", "other")


@dataclass(frozen=True)
class Atom:
    atomic_number: int
    formal_charge: int = 0
    explicit_h: int | None = None  # None for organic-subset atoms
    aromatic: bool = False
    chirality: str = "unspecified"
    implicit_h: int = 0
    degree: int = 0
    in_ring: bool = False
    hybridization: str = "other"

    @property
    def symbol(self) -> str:
        return ELEMENTS[self.atomic_number]

    @property
    def total_h(self) -> int:
        return self.implicit_h + (self.explicit_h or 0)


@dataclass(frozen=True)
class Bond:
    """Undirected bond.

    ``a`` is the atom the bond was written from, which is what ``direction``
    (``/`` or ``\\``) is relative to.
    """

    a: int
    b: int
    order: str = "single"
    direction: str = "none"
    stereo: str = "none"
    in_ring: bool = False

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a

    @property
    def valence(self) -> float:
        return {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}[self.order]


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    rings: tuple[frozenset, ...] = ()
    source_smiles: str = ""
    # Per atom: neighbour order the chirality tag refers to (-1 marks an
    # implicit hydrogen). Empty for non-stereo atoms.
    stereo_refs: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """``adjacency[i]`` lists ``(neighbour, bond_index)`` pairs in bond order."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for k, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, k))
            adj[bond.b].append((bond.a, k))
        return tuple(tuple(x) for x in adj)

    @cached_property
    def bond_index(self) -> dict[frozenset, int]:
        return {frozenset((b.a, b.b)): k for k, b in enumerate(self.bonds)}

    def bond_between(self, i: int, j: int) -> Bond | None:
        k = self.bond_index.get(frozenset((i, j)))
        return None if k is None else self.bonds[k]

    def neighbors(self, i: int) -> list[int]:
        return [j for j, _ in self.adjacency[i]]

    def __repr__(self) -> str:
        return f"MolGraph({self.source_smiles!r}, atoms={len(self.atoms)}, bonds={len(self.bonds)})"


def induced_subgraph(mol: MolGraph, keep, fill_hydrogens: bool = True, keep_stereo: bool = False) -> MolGraph:
    """Subgraph on atom indices ``keep`` (re-indexed in ascending order).

    With ``fill_hydrogens`` each cut bond is replaced by hydrogens on the
    surviving atom (as explicit H counts), so the fragment keeps its valence.
    Stereo tags are dropped unless ``keep_stereo``.
    """
    keep = sorted(set(keep))
    new_index = {old: new for new, old in enumerate(keep)}
    bonds = []
    lost = [0] * len(keep)
    for b in mol.bonds:
        ia, ib = new_index.get(b.a), new_index.get(b.b)
        if ia is not None and ib is not None:
            bonds.append(Bond(ia, ib, b.order, b.direction if keep_stereo else "none",
                              b.stereo if keep_stereo else "none"))
        elif ia is not None or ib is not None:
            lost[ia if ia is not None else ib] += int(b.valence)
    rings = sssr(len(keep), [(b.a, b.b) for b in bonds])
    ring_atoms = set().union(*rings) if rings else set()
    bonds = [replace(b, in_ring=any(b.a in r and b.b in r for r in rings)) for b in bonds]
    degree = [0] * len(keep)
    for b in bonds:
        degree[b.a] += 1
        degree[b.b] += 1
    atoms = []
    for new, old in enumerate(keep):
        a = mol.atoms[old]
        h = a.total_h + (lost[new] if fill_hydrogens else 0)
        atoms.append(replace(a, explicit_h=h, implicit_h=0, degree=degree[new], in_ring=new in ring_atoms,
                             chirality=a.chirality if keep_stereo else "unspecified"))
    return MolGraph(tuple(atoms), tuple(bonds), tuple(rings), mol.source_smiles)
