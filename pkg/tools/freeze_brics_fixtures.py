"""Freeze BRICS partition fixtures with RDKit as an independent oracle.

Run offline only; RDKit is not a dependency of the package. Bonds found by
``BRICS.FindBRICSBonds`` are restricted to acyclic single bonds (the olefin
rule cuts double bonds, which this package does not do). Fragments are the
connected components after removing those bonds.
"""

import json
import sys
from pathlib import Path

from rdkit import Chem
from rdkit.Chem import BRICS

root = Path(__file__).resolve().parents[1]
src = root / "tests" / "data" / "brics50.smi"
out = root / "tests" / "data" / "brics50_fixtures.json"


def components(n, edges):
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen, groups = set(), []
    for s in range(n):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        groups.append(sorted(comp))
    return groups


records = []
for line in src.read_text().splitlines():
    smi, name = line.split()
    mol = Chem.MolFromSmiles(smi)
    cut = set()
    for (i, j), _ in BRICS.FindBRICSBonds(mol):
        bond = mol.GetBondBetweenAtoms(i, j)
        if bond.GetBondType() == Chem.BondType.SINGLE and not bond.IsInRing():
            cut.add((min(i, j), max(i, j)))
    kept = [(b.GetBeginAtomIdx(), b.GetEndAtomIdx()) for b in mol.GetBonds()
            if (min(b.GetBeginAtomIdx(), b.GetEndAtomIdx()), max(b.GetBeginAtomIdx(), b.GetEndAtomIdx())) not in cut]
    records.append({
        "name": name,
        "smiles": smi,
        "cleaved_atom_pairs": sorted([list(p) for p in cut]),
        "fragments": components(mol.GetNumAtoms(), kept),
        "total_h": [a.GetTotalNumHs() for a in mol.GetAtoms()],
        "aromatic": [a.GetIsAromatic() for a in mol.GetAtoms()],
        "n_rings": mol.GetRingInfo().NumRings(),
    })
json.dump({"oracle": "rdkit " + Chem.rdBase.rdkitVersion, "molecules": records}, out.open("w"), indent=1)
print(f"wrote {len(records)} fixtures to {out}", file=sys.stderr)
