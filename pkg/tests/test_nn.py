import struct

import numpy as np
import pytest

from helpers import corpus_mols, kink_margin, permute_graph
from molcontrast.augment import AugSpec, apply
from molcontrast.chem import featurize, parse_smiles
from molcontrast.errors import CheckpointError, CheckpointVersionMismatch, CodeOutOfVocab, PartitionMismatch, TraceMismatch
from molcontrast.fragment import brics_partition
from molcontrast.nn import (attach_prediction_head, backward, collate, encode, forward, init_model, load_checkpoint,
                            mean_pool_matrix, predict, project, readout_fragments, readout_graph, save_checkpoint)
from molcontrast.nn.checkpoint import MAGIC, from_bytes, to_bytes
from molcontrast.nn.model import set_head_input_norm
from molcontrast.train.finetune import task_loss


def _small(seed=0, dtype=np.float64, **kw):
    args = dict(d=8, d_z=6, n_layers=2, seed=seed, dtype=dtype)
    args.update(kw)
    return init_model("original", **args)


def _relu(x):
    return np.maximum(x, 0)


# --- encode ----------------------------------------------------------------------

def test_single_atom_is_composed_mlps():
    model = _small()
    p = model.params
    fg = featurize(parse_smiles("O"))
    h = p["node_emb.atomic"][8] + p["node_emb.chirality"][0]
    for k in range(2):
        h = _relu(h @ p[f"gin.{k}.w1"] + p[f"gin.{k}.b1"]) @ p[f"gin.{k}.w2"] + p[f"gin.{k}.b2"]
        h = _relu(h) if k == 0 else h
    assert np.allclose(encode(model, fg)[0][0], h, atol=1e-14)


def test_two_atom_layer_by_hand():
    model = _small(n_layers=1)
    p = model.params
    fg = featurize(parse_smiles("CO"))
    x = np.stack([p["node_emb.atomic"][6], p["node_emb.atomic"][8]]) + p["node_emb.chirality"][0]
    e = p["edge_emb.bond_type"][0] + p["edge_emb.bond_dir"][0]
    m = x + _relu(x[::-1] + e)
    want = _relu(m @ p["gin.0.w1"] + p["gin.0.b1"]) @ p["gin.0.w2"] + p["gin.0.b2"]
    assert np.allclose(encode(model, fg)[0], want, atol=1e-14)


def test_zero_model_gives_zero_states():
    model = _small()
    for k in model.params:
        model.params[k][...] = 0
    h, _ = encode(model, featurize(parse_smiles("CCOC(=O)c1ccccc1")))
    assert not h.any()


def test_code_out_of_vocab():
    model = _small()
    fg = featurize(parse_smiles("CCO"))
    fg.node_codes[0, 0] = 500
    with pytest.raises(CodeOutOfVocab):
        encode(model, fg)
    with pytest.raises(CodeOutOfVocab):
        encode(model, featurize(parse_smiles("CCO"), "extended"))


def test_isolated_nodes_are_independent():
    model = _small(n_layers=3)
    mol = parse_smiles("CCOC(=O)c1ccccc1")
    fg = featurize(mol)
    bare = apply(fg, AugSpec(frozenset(), frozenset(range(len(mol.bonds)))))
    h0, _ = encode(model, bare)
    bare.node_codes[4, 0] = 7
    h1, _ = encode(model, bare)
    others = np.arange(fg.n_atoms) != 4
    assert np.array_equal(h0[others], h1[others])
    assert not np.array_equal(h0[4], h1[4])


def test_permutation_equivariance_extended_float64():
    rng = np.random.default_rng(4)
    for mol in corpus_mols(limit=10):
        model = init_model("extended", d=16, d_z=8, n_layers=3, seed=1, dtype=np.float64)
        fg = featurize(mol, "extended")
        perm = rng.permutation(fg.n_atoms)
        h, _ = encode(model, fg)
        hp, _ = encode(model, permute_graph(fg, perm))
        assert np.allclose(hp, h[perm], atol=1e-12)


def test_forward_is_bit_reproducible():
    model = _small(dtype=np.float32)
    graphs = [featurize(m) for m in corpus_mols(limit=20)]
    a = forward(model, graphs)[0]["mol"]
    b = forward(model, graphs)[0]["mol"]
    assert np.array_equal(a, b)


# --- readouts ----------------------------------------------------------------------

def test_readout_graph_examples():
    fg3 = featurize(parse_smiles("CCO"))
    v = np.arange(4.0)
    assert np.array_equal(readout_graph(np.tile(v, (3, 1)), fg3), v)
    u = np.array([1.0, -2.0, 3.0])
    assert not readout_graph(np.stack([u, -u]), featurize(parse_smiles("CC"))).any()
    assert np.array_equal(readout_graph(u[None, :], featurize(parse_smiles("C"))), u)


def test_readout_fragments_examples():
    mol = parse_smiles("CCOC(=O)c1ccccc1")
    fg = featurize(mol)
    h = np.random.default_rng(0).normal(size=(11, 4))
    ones = np.zeros(11, dtype=np.int64)
    assert np.allclose(readout_fragments(h, fg, ones)[0], readout_graph(h, fg))
    assert np.array_equal(readout_fragments(h, fg, np.arange(11)), h)
    states = np.array([[1.0, 2.0], [3.0, 4.0], [0.0, 0.0], [3.0, 3.0], [6.0, -3.0]])
    rows = readout_fragments(states, None, [0, 0, 1, 1, 1])
    assert rows.tolist() == [[2.0, 3.0], [3.0, 0.0]]
    with pytest.raises(PartitionMismatch):
        readout_fragments(h, fg, np.zeros(5, dtype=np.int64))
    with pytest.raises(PartitionMismatch):
        mean_pool_matrix(np.array([0, 2]), 3, np.float64)


def test_collate_offsets_fragment_ids():
    mols = [parse_smiles(s) for s in ("CCOC(=O)c1ccccc1", "CC", "CC(=O)Nc1ccc(O)cc1")]
    maps = [brics_partition(m) for m in mols]
    batch = collate([featurize(m) for m in mols], [fm.assignment for fm in maps])
    assert batch.n_fragments == sum(fm.n_fragments for fm in maps)
    assert batch.fragment_of_node[:11].tolist() == list(maps[0].assignment)
    assert batch.fragment_of_node[11:13].tolist() == [4, 4]
    with pytest.raises(PartitionMismatch):
        collate([featurize(mols[1])], [[0, 2]])


# --- heads -------------------------------------------------------------------------

def _identity_head(model, head):
    d = model.d
    model.params.update({f"{head}.w1": np.eye(d), f"{head}.b1": np.zeros(d), f"{head}.w2": np.eye(d),
                         f"{head}.b2": np.zeros(d)})


def test_project_examples():
    model = _small(d=2, d_z=2)
    x = np.array([[1.0, 2.0], [0.5, 0.0]])
    for k in ("proj.w1", "proj.b1", "proj.w2", "proj.b2"):
        model.params[k] = np.zeros_like(model.params[k])
    assert not project(model, x).any()
    _identity_head(model, "proj")
    assert np.array_equal(project(model, x), x)
    model.params.update({"proj.w1": np.array([[1.0, -1.0], [2.0, 0.5]]), "proj.b1": np.array([0.0, 1.0]),
                         "proj.w2": np.array([[1.0, 2.0], [3.0, -1.0]]), "proj.b2": np.array([0.5, 0.0])})
    # x0: u = [5, 1], r = [5, 1], z = [8.5, 9]; x1: u = [0.5, 0.5], r = [0.5, 0.5], z = [2.5, 0.5]
    assert project(model, x).tolist() == [[8.5, 9.0], [2.5, 0.5]]


def test_predict_examples():
    model = attach_prediction_head(_small(d=2, d_z=2), 2, seed=0)
    assert "proj.w1" not in model.params
    x = np.array([[1.0, 2.0]])
    _identity_head(model, "pred")
    assert np.array_equal(predict(model, x), x)
    model.params.update({"pred.w1": np.array([[1.0, -1.0], [2.0, 0.5]]), "pred.b1": np.array([0.0, 1.0]),
                         "pred.w2": np.array([[1.0, 2.0], [3.0, -1.0]]), "pred.b2": np.array([0.5, 0.0])})
    assert predict(model, x).tolist() == [[8.5, 9.0]]


def test_head_input_norm_standardizes():
    model = attach_prediction_head(_small(), 1)
    x = np.random.default_rng(1).normal(3.0, 2.0, size=(50, 8))
    set_head_input_norm(model, x)
    _identity_head(model, "pred")
    model.params["pred.w2"] = np.eye(8)[:, :1]
    model.params["pred.b2"] = np.zeros(1)
    model.params["pred.b1"] = np.full(8, 100.0)       # keep the hidden ReLU linear
    y = predict(model, x)[:, 0] - 100.0
    assert abs(y.mean()) < 1e-9 and abs(y.std() - 1.0) < 1e-5
    assert "pred.in_mean" not in model.trainable_keys()


# --- backward ----------------------------------------------------------------------

def test_zero_upstream_gives_zero_grads():
    model = _small()
    out, trace = forward(model, [featurize(m) for m in corpus_mols(limit=3)])
    grads = backward(model, trace, {"mol": np.zeros_like(out["mol"])})
    assert set(grads) == set(model.params) and not any(g.any() for g in grads.values())


def test_readout_gradient_is_one_over_n():
    model = _small(n_layers=0)
    fg = featurize(parse_smiles("CCO"))
    _, trace = forward(model, fg, ("mol",), None)
    grads = backward(model, trace, {"mol": np.ones((1, 8))})
    assert np.allclose(grads["node_emb.atomic"][6], 2 / 3) and np.allclose(grads["node_emb.atomic"][8], 1 / 3)
    assert np.allclose(grads["node_emb.chirality"][0], 1.0)
    assert not np.delete(grads["node_emb.atomic"], [6, 8], axis=0).any()


def test_trace_mismatch():
    a, b = _small(0), _small(1)
    out, trace = forward(a, featurize(parse_smiles("CCO")))
    with pytest.raises(TraceMismatch):
        backward(b, trace, {"mol": out["mol"]})
    with pytest.raises(TraceMismatch):
        backward(a, trace, {"frag": out["mol"]})
    with pytest.raises(TraceMismatch):
        backward(a, trace, {"mol": np.ones((2, 6))})


def _fd_check(model, loss_fn, keys, step=1e-4):
    _, grads = loss_fn(model, True)
    worst = 0.0
    for key in keys:
        flat = model.params[key].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            vals = []
            for k in (2, 1, -1, -2):
                flat[i] = old + k * step
                vals.append(loss_fn(model, False))
            flat[i] = old
            num = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * step)
            ana = grads[key].reshape(-1)[i]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-6))
    return worst


def test_finetune_path_gradients():
    """Masked BCE and squared error through predict, checked by central differences."""
    mols = corpus_mols(limit=4)
    graphs = [featurize(m) for m in mols]
    # first seed whose rectifier inputs stay clear of the stencil's reach
    model = next(m for m in (attach_prediction_head(_small(seed=s), 2, seed=1) for s in range(50))
                 if kink_margin(forward(m, graphs, ("mol",), "pred")[1]) > 5e-4)
    target = np.array([[1.0, 0.3], [0.0, np.nan], [np.nan, -1.2], [1.0, 2.0]])
    types = ("classification", "regression")

    def loss_fn(m, want_grads):
        out, trace = forward(m, graphs, ("mol",), "pred")
        loss, dy = task_loss(out["mol"], target, types)
        return (loss, backward(m, trace, {"mol": dy})) if want_grads else loss

    assert _fd_check(model, loss_fn, model.trainable_keys()) < 1e-4


# --- checkpoints -------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = _small(dtype=np.float32)
    save_checkpoint(model, tmp_path / "m.ckpt", {"note": "x"})
    loaded, meta = load_checkpoint(tmp_path / "m.ckpt")
    assert meta == {"note": "x"}
    assert list(loaded.params) == list(model.params)
    assert all(np.array_equal(loaded.params[k], model.params[k]) for k in model.params)
    assert (loaded.d, loaded.d_z, loaded.n_layers, loaded.feature_set) == (8, 6, 2, "original")
    assert to_bytes(loaded, meta) == (tmp_path / "m.ckpt").read_bytes()
    data = (tmp_path / "m.ckpt").read_bytes()
    assert data[:4] == MAGIC and struct.unpack("<I", data[4:8])[0] == 1


def test_checkpoint_errors():
    data = to_bytes(_small(dtype=np.float32))
    with pytest.raises(CheckpointError):
        from_bytes(b"NOPE" + data[4:])
    with pytest.raises(CheckpointVersionMismatch):
        from_bytes(data[:4] + struct.pack("<I", 99) + data[8:])
    with pytest.raises(CheckpointError):
        from_bytes(data[:-4])
    with pytest.raises(CheckpointError):
        from_bytes(data + b"\0")
    bad = _small(dtype=np.float32)
    bad.params["gin.0.b1"][0] = np.nan
    with pytest.raises(CheckpointError):
        to_bytes(bad)
