import numpy as np
import pytest

from helpers import corpus_mols
from molcontrast.augment import AugSpec, apply, round_half_up, sample_augmentation, view_seed
from molcontrast.chem import featurize, node_features, parse_smiles
from molcontrast.errors import IndexOutOfRange


def test_round_half_up():
    assert [round_half_up(x) for x in (0.25, 0.5, 1.5, 2.5, 2.49)] == [0, 1, 2, 3, 2]


def test_four_atom_four_bond_molecule():
    spec = sample_augmentation(parse_smiles("C1CCC1"), seed=3)
    assert len(spec.masked_atoms) == 1 and len(spec.deleted_bonds) == 1


def test_single_atom():
    spec = sample_augmentation(parse_smiles("C"), seed=3)
    assert spec.masked_atoms == frozenset() and spec.deleted_bonds == frozenset()


def test_counts_and_determinism_on_corpus():
    for i, mol in enumerate(corpus_mols(limit=100)):
        spec = sample_augmentation(mol, seed=i)
        assert len(spec.masked_atoms) == int(np.floor(0.25 * mol.n_atoms + 0.5))
        assert len(spec.deleted_bonds) == int(np.floor(0.25 * len(mol.bonds) + 0.5))
        assert spec == sample_augmentation(mol, seed=i)


def test_identity_augmentation():
    fg = featurize(parse_smiles("CCOC(=O)c1ccccc1"))
    out = apply(fg, AugSpec(frozenset(), frozenset()))
    for name in ("node_codes", "edge_codes", "arcs", "arc_bond", "masked"):
        assert np.array_equal(getattr(out, name), getattr(fg, name))


def test_mask_and_delete_examples():
    fg = featurize(parse_smiles("CCO"), "extended")
    masked = apply(fg, AugSpec(frozenset({0}), frozenset()))
    assert masked.node_codes[0].tolist() == [f.mask_code for f in node_features("extended")]
    assert np.array_equal(masked.arcs, fg.arcs)
    cut = apply(fg, AugSpec(frozenset(), frozenset({1})))
    assert cut.n_arcs == 2 and cut.arcs.tolist() == [[0, 1], [1, 0]]
    assert cut.n_atoms == 3


def test_out_of_range_indices():
    fg = featurize(parse_smiles("CCO"))
    with pytest.raises(IndexOutOfRange):
        apply(fg, AugSpec(frozenset({3}), frozenset()))
    with pytest.raises(IndexOutOfRange):
        apply(fg, AugSpec(frozenset(), frozenset({2})))


def test_atom_index_stability():
    for i, mol in enumerate(corpus_mols(limit=60)):
        fg = featurize(mol, "extended")
        view = apply(fg, sample_augmentation(mol, seed=100 + i))
        keep = ~view.masked
        assert view.n_atoms == fg.n_atoms
        assert np.array_equal(view.node_codes[keep], fg.node_codes[keep])
        # arcs stay paired: each surviving bond keeps both directions
        assert sorted(np.bincount(view.arc_bond).tolist()).count(1) == 0


def test_view_seeds_are_independent():
    seeds = {view_seed(b, m, v) for b in range(3) for m in range(4) for v in range(2)}
    assert len(seeds) == 24
    mol = parse_smiles("CCCCCCCCCCCCCCCC")
    a = sample_augmentation(mol, view_seed(7, 0, 0))
    b = sample_augmentation(mol, view_seed(7, 1, 0))
    assert a.masked_atoms != b.masked_atoms or a.deleted_bonds != b.deleted_bonds
