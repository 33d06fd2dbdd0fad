"""SMILES writer and canonical ordering.

``canonical_smiles`` refines atom invariants Morgan-style, then breaks the
remaining ties by individualisation and keeps the lexicographically smallest
string over the search tree. Molecules are small, so the tree is tiny; a leaf
budget guards against pathological symmetry.
"""

from __future__ import annotations

from .graph import MolGraph
from .smiles import ORGANIC, assign_hydrogens

_LEAF_BUDGET = 4096
_BOND_RANK = {"single": 1, "double": 2, "triple": 3, "aromatic": 4}
_ORGANIC_Z = set(ORGANIC.values())
_FLIP = {"end_upright": "end_downright", "end_downright": "end_upright", "none": "none"}


def _permutation_parity(src: list[int], dst: list[int]) -> int:
    """0 when ``dst`` is an even permutation of ``src``."""
    pos = {v: i for i, v in enumerate(src)}
    perm = [pos[v] for v in dst]
    parity, seen = 0, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def _atom_token(mol: MolGraph, i: int, chirality: str) -> str:
    atom = mol.atoms[i]
    sym = atom.symbol.lower() if atom.aromatic else atom.symbol
    if atom.atomic_number in _ORGANIC_Z and atom.formal_charge == 0 and chirality == "unspecified":
        orders = [mol.bonds[k].order for _, k in mol.adjacency[i]]
        probe = type(atom)(atom.atomic_number, 0, None, atom.aromatic)
        try:
            if assign_hydrogens(probe, orders, bracket=False) == atom.total_h:
                return sym
        except ValueError:
            pass
    out = ["[", sym]
    if chirality == "CCW":
        out.append("@")
    elif chirality == "CW":
        out.append("@@")
    h = atom.total_h
    if h:
        out.append("H" if h == 1 else f"H{h}")
    c = atom.formal_charge
    if c:
        sign = "+" if c > 0 else "-"
        out.append(sign if abs(c) == 1 else f"{sign}{abs(c)}")
    out.append("]")
    return "".join(out)


def _bond_token(mol: MolGraph, k: int, src: int) -> str:
    bond = mol.bonds[k]
    if bond.order == "double":
        return "="
    if bond.order == "triple":
        return "#"
    if bond.order == "aromatic":
        return ""
    direction = bond.direction if src == bond.a else _FLIP[bond.direction]
    if direction == "end_upright":
        return "/"
    if direction == "end_downright":
        return "\\"
    a, b = mol.atoms[bond.a], mol.atoms[bond.b]
    return "-" if a.aromatic and b.aromatic else ""


def write_smiles(mol: MolGraph, ranks: list[int] | None = None) -> tuple[str, list[int]]:
    """Serialise ``mol``; atoms are visited in ascending ``ranks``.

    Returns the string and the output order (output position -> atom index),
    which is the atom indexing a re-parse of the string will produce.
    """
    n = mol.n_atoms
    if ranks is None:
        ranks = list(range(n))
    nbrs = [sorted(mol.adjacency[i], key=lambda t: ranks[t[0]]) for i in range(n)]
    start = min(range(n), key=lambda i: ranks[i])

    # pass 1: spanning tree and ring-closure bonds
    visited = [False] * n
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    closures: list[list[tuple[int, int]]] = [[] for _ in range(n)]  # (partner, bond) at both ends
    closure_seen: set[int] = set()
    order: list[int] = []
    stack = [(start, -1)]
    parent_bond = [-1] * n
    # iterative DFS that emulates the recursive visit order
    it_stack: list[tuple[int, int]] = []
    visited[start] = True
    order.append(start)
    it_stack.append((start, 0))
    while it_stack:
        v, idx = it_stack.pop()
        if idx < len(nbrs[v]):
            it_stack.append((v, idx + 1))
            u, k = nbrs[v][idx]
            if k == parent_bond[v]:
                continue
            if visited[u]:
                if k not in closure_seen:
                    closure_seen.add(k)
                    closures[u].append((v, k))  # u opened earlier
                    closures[v].append((u, k))
                continue
            visited[u] = True
            parent_bond[u] = k
            children[v].append((u, k))
            order.append(u)
            it_stack.append((u, 0))
    del stack
    position = {a: p for p, a in enumerate(order)}

    # ring labels are assigned in emission order
    out: list[str] = []
    free: list[int] = []
    next_label = [1]
    label_of: dict[int, int] = {}
    emitted_order: list[int] = []

    def take_label() -> int:
        if free:
            free.sort()
            return free.pop(0)
        lab = next_label[0]
        next_label[0] += 1
        return lab

    def fmt(lab: int) -> str:
        return str(lab) if lab < 10 else f"%{lab:02d}"

    def emit(v: int, parent: int, via: int) -> None:
        emitted_order.append(v)
        if parent >= 0:
            out.append(_bond_token(mol, via, parent))
        closing = sorted((c for c in closures[v] if position[c[0]] < position[v]), key=lambda c: label_of[c[1]])
        opening = sorted((c for c in closures[v] if position[c[0]] > position[v]), key=lambda c: position[c[0]])
        kids = children[v]
        ring_partners = []
        ring_text = []
        for partner, k in closing:
            lab = label_of.pop(k)
            ring_text.append(fmt(lab))
            free.append(lab)
            ring_partners.append(partner)
        for partner, k in opening:
            lab = take_label()
            label_of[k] = lab
            ring_text.append(_bond_token(mol, k, v) + fmt(lab))
            ring_partners.append(partner)
        chirality = mol.atoms[v].chirality
        if chirality in ("CW", "CCW"):
            new = ([parent] if parent >= 0 else []) + ([-1] if mol.atoms[v].total_h else []) \
                + ring_partners + [c for c, _ in kids]
            ref = [x for x in mol.stereo_refs[v]] if mol.stereo_refs else []
            if sorted(ref) == sorted(new) and _permutation_parity(ref, new):
                chirality = "CW" if chirality == "CCW" else "CCW"
            elif sorted(ref) != sorted(new):
                chirality = "unspecified"
        out.append(_atom_token(mol, v, chirality))
        out.extend(ring_text)
        for j, (c, k) in enumerate(kids):
            last = j == len(kids) - 1
            if not last:
                out.append("(")
            emit(c, v, k)
            if not last:
                out.append(")")

    emit(start, -1, -1)
    return "".join(out), emitted_order


def to_smiles(mol: MolGraph) -> str:
    return write_smiles(mol)[0]


def _initial_invariants(mol: MolGraph) -> list[tuple]:
    return [
        (a.atomic_number, a.aromatic, a.formal_charge, a.total_h, a.degree, a.in_ring,
         a.chirality != "unspecified")
        for a in mol.atoms
    ]


def _refine(mol: MolGraph, ranks: list[int]) -> list[int]:
    """Iterate neighbourhood refinement until the partition stops splitting."""
    while True:
        keys = [
            (ranks[i], tuple(sorted((_BOND_RANK[mol.bonds[k].order], ranks[j]) for j, k in mol.adjacency[i])))
            for i in range(mol.n_atoms)
        ]
        new = _dense_ranks(keys)
        if len(set(new)) == len(set(ranks)):
            return new
        ranks = new


def _dense_ranks(keys: list) -> list[int]:
    lookup = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [lookup[k] for k in keys]


def canonical_ranks(mol: MolGraph) -> list[int]:
    """Refined (possibly tied) canonical classes."""
    return _refine(mol, _dense_ranks(_initial_invariants(mol)))


def canonical_smiles(mol: MolGraph) -> str:
    if mol.n_atoms == 0:
        return ""
    best: list[str | None] = [None]
    leaves = [0]

    def search(ranks: list[int]) -> None:
        if leaves[0] >= _LEAF_BUDGET and best[0] is not None:
            return
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = [r for r in sorted(counts) if counts[r] > 1]
        if not tied:
            leaves[0] += 1
            s = write_smiles(mol, ranks)[0]
            if best[0] is None or s < best[0]:
                best[0] = s
            return
        cls = tied[0]
        for i in range(mol.n_atoms):
            if ranks[i] != cls:
                continue
            # individualise atom i: it sorts ahead of its former classmates
            keys = [(2 * r + (0 if j == i or r != cls else 1)) for j, r in enumerate(ranks)]
            search(_refine(mol, _dense_ranks(keys)))

    search(canonical_ranks(mol))
    return best[0]
