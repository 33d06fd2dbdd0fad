"""Generate the 512-molecule desk-scale pre-training corpus.

Molecules are drug-like combinations of a ring core with one to three
substituents, drawn with a fixed seed and deduplicated by canonical SMILES.
Output: tests/data/corpus512.smi
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from molcontrast.chem import canonical_smiles, parse_smiles  # noqa: E402

CORES = [
    "c1cc({a})ccc1{b}", "c1ccc({a})cc1", "c1cc({a})cc({b})c1{c}", "c1ccc2cc({a})ccc2c1",
    "c1cc({a})ncc1{b}", "c1cnc({a})nc1", "c1cc({a})oc1", "c1cc({a})sc1{b}", "c1cn({a})cn1",
    "C1CCN({a})CC1", "C1CCC({a})CC1{b}", "C1CN({a})CCN1{b}", "C1CCOC1{a}", "O=C1CCCN1{a}",
    "c1ccc2[nH]c({a})cc2c1", "c1ccc2oc({a})nc2c1", "C1CC1{a}", "c1cc({a})c({b})cn1",
    "O=C1NC(=O)C({a})N1", "c1ccc(cc1)C({a})c1ccccc1",
]
SUBS = [
    "C", "CC", "CCC", "C(C)C", "O", "OC", "OCC", "N", "NC", "N(C)C", "F", "Cl", "Br", "C(F)(F)F",
    "C#N", "C(=O)O", "C(=O)OC", "C(=O)OCC", "C(=O)N", "C(=O)NC", "NC(=O)C", "NC(=O)c3ccccc3",
    "S(=O)(=O)N", "S(=O)(=O)C", "SC", "CCN(C)C", "CCO", "OCc3ccccc3", "c3ccccc3", "c3ccncc3",
    "N3CCOCC3", "N3CCCC3", "C3CCCCC3", "C(=O)c3ccccc3", "Oc3ccccc3", "CC(=O)O", "C=C", "C#C",
    "CNC(=O)OC(C)(C)C", "c3ccc(F)cc3",
]


def main(n=512, seed=20240611):
    rng = np.random.default_rng(seed)
    seen, out = set(), []
    while len(out) < n:
        core = CORES[rng.integers(len(CORES))]
        slots = {k: SUBS[rng.integers(len(SUBS))] for k in "abc"}
        smi = core.format(**slots)
        mol = parse_smiles(smi)
        key = canonical_smiles(mol)
        if key in seen:
            continue
        seen.add(key)
        out.append(smi)
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "corpus512.smi"
    path.write_text("".join(s + "\n" for s in out))
    print(f"wrote {len(out)} molecules to {path}")


if __name__ == "__main__":
    main()
