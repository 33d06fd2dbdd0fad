"""Smallest set of smallest rings.

Candidates are Horton cycles (shortest path v->x, edge x-y, shortest path
y->v); they are sorted by (size, sorted atom indices) and accepted greedily
when independent over GF(2) in edge space. The Horton set always contains a
minimum cycle basis, so the greedy pass yields one.
"""

from __future__ import annotations

from collections import deque
from typing import Sequence


def _bfs_parents(adj: Sequence[Sequence[int]], root: int) -> list[int | None]:
    parent: list[int | None] = [None] * len(adj)
    parent[root] = root
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if parent[u] is None:
                parent[u] = v
                queue.append(u)
    return parent


def _path(parent: list[int | None], root: int, x: int) -> list[int]:
    out = [x]
    while x != root:
        x = parent[x]
        out.append(x)
    return out


def cycle_rank(n_atoms: int, edges: Sequence[tuple[int, int]]) -> int:
    adj: list[list[int]] = [[] for _ in range(n_atoms)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n_atoms
    components = 0
    for s in range(n_atoms):
        if seen[s]:
            continue
        components += 1
        seen[s] = True
        stack = [s]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
    return len(edges) - n_atoms + components


def sssr(n_atoms: int, edges: Sequence[tuple[int, int]]) -> list[frozenset]:
    """Return the SSSR of an undirected simple graph as atom-index sets."""
    rank = cycle_rank(n_atoms, edges)
    if rank == 0:
        return []
    adj: list[list[int]] = [[] for _ in range(n_atoms)]
    edge_id: dict[tuple[int, int], int] = {}
    for k, (a, b) in enumerate(edges):
        adj[a].append(b)
        adj[b].append(a)
        edge_id[(a, b)] = edge_id[(b, a)] = k
    for nbrs in adj:
        nbrs.sort()

    candidates: dict[int, tuple[int, tuple[int, ...]]] = {}
    for v in range(n_atoms):
        if not adj[v]:
            continue
        parent = _bfs_parents(adj, v)
        for x, y in edges:
            if parent[x] is None:
                continue
            px = _path(parent, v, x)
            py = _path(parent, v, y)
            if set(px) & set(py) != {v}:
                continue
            atoms = set(px) | set(py)
            if len(atoms) < 3:
                continue
            mask = 1 << edge_id[(x, y)]
            for path in (px, py):
                for s, t in zip(path, path[1:]):
                    mask |= 1 << edge_id[(s, t)]
            if bin(mask).count("1") != len(atoms):
                continue
            candidates.setdefault(mask, (len(atoms), tuple(sorted(atoms))))

    ordered = sorted(candidates.items(), key=lambda kv: (kv[1][0], kv[1][1], kv[0]))
    basis: dict[int, int] = {}  # pivot bit -> reduced vector
    rings: list[frozenset] = []
    for mask, (_, atoms) in ordered:
        vec = mask
        while vec:
            pivot = vec.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = vec
                rings.append(frozenset(atoms))
                break
            vec ^= basis[pivot]
        if len(rings) == rank:
            break
    return rings
