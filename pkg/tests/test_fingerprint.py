import numpy as np
import pytest

from helpers import corpus_mols
from molcontrast.chem import parse_smiles
from molcontrast.errors import DomainError, WidthMismatch
from molcontrast.fingerprint import (Fingerprint, build_weight_matrix, ecfp, morgan_identifiers, neg_weight, tanimoto,
                                     tanimoto_matrix)


def _fp(bits, nbits=64):
    v = np.zeros(nbits, dtype=bool)
    v[list(bits)] = True
    return Fingerprint(v, 0, nbits)


def test_radius_zero_benzene_single_bit():
    assert ecfp(parse_smiles("c1ccccc1"), 0, 2048).popcount() == 1


def test_radius_zero_ethanol_three_bits():
    mol = parse_smiles("CCO")
    assert len(set(morgan_identifiers(mol, 0)[0])) == 3
    assert ecfp(mol, 0, 2048).popcount() == 3


def test_deterministic_and_alias_invariant():
    a = ecfp(parse_smiles("CCO"))
    assert a == ecfp(parse_smiles("CCO"))
    assert a == ecfp(parse_smiles("OCC"))
    assert ecfp(parse_smiles("Cc1ccccc1O")) == ecfp(parse_smiles("Oc1ccccc1C"))


def test_hex_is_stable():
    # frozen output of the documented hash scheme; a change here breaks stored fingerprints
    fp = ecfp(parse_smiles("CCO"), 0, 64)
    assert fp.to_hex() == "0000000000004001"
    assert ecfp(parse_smiles("CCOC(=O)c1ccccc1"), 2, 64).to_hex() == "801000b982b84245"
    assert Fingerprint.from_hex(fp.to_hex(), 0, 64) == fp


def test_tanimoto_examples():
    a = _fp({1, 2, 3})
    assert tanimoto(a, a) == 1.0
    assert tanimoto(a, _fp({10, 11})) == 0.0
    assert tanimoto(a, _fp({2, 3, 4})) == 0.5
    assert tanimoto(_fp(set()), _fp(set())) == 1.0
    with pytest.raises(WidthMismatch):
        tanimoto(a, _fp({1}, 128))


def test_tanimoto_properties_on_corpus():
    fps = [ecfp(m) for m in corpus_mols(limit=80)]
    sim = tanimoto_matrix(fps)
    assert np.allclose(sim, sim.T) and np.all(np.diag(sim) == 1.0)
    assert np.all((sim >= 0) & (sim <= 1))
    for i in range(0, 80, 7):
        for j in range(0, 80, 5):
            assert sim[i, j] == tanimoto(fps[i], fps[j])


def test_monotone_fold():
    for mol in corpus_mols(limit=50):
        counts = [ecfp(mol, 2, n).popcount() for n in (64, 128, 256, 1024, 4096)]
        assert counts == sorted(counts)


def test_neg_weight():
    assert neg_weight(1.0, 0.5) == 0.5
    assert neg_weight(0.0, 0.7) == 1.0
    assert neg_weight(0.42, 0.0) == 1.0
    for bad in ((1.5, 0.5), (0.5, -0.1), (0.5, 1.1)):
        with pytest.raises(DomainError):
            neg_weight(*bad)


def test_weight_matrix_examples():
    mols = [parse_smiles(s) for s in ("Cc1ccccc1", "Cc1ccccc1C", "C1CCCCC1")]
    w = build_weight_matrix(mols, 0.5).w
    assert w.shape == (6, 6)
    assert w[0, 1] == 0.5 and w[2, 3] == 0.5          # views of one molecule
    assert w[0, 4] == 1.0                              # toluene vs cyclohexane share no bits
    assert 0.5 < w[0, 2] < 1.0
    assert np.array_equal(w, w.T)
    t_x = tanimoto(ecfp(mols[0]), ecfp(mols[1]))
    t_c = tanimoto(ecfp(mols[0]), ecfp(mols[2]))
    assert t_x > t_c


def test_weight_matrix_rejects_empty_batch():
    with pytest.raises(DomainError):
        build_weight_matrix([], 0.5)
