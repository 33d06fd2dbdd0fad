import math

import numpy as np
import pytest

from helpers import corpus_mols
from molcontrast.chem import featurize, parse_smiles
from molcontrast.errors import (ConfigError, DomainError, EmptyDataset, EmptyInput, NonFiniteGrad, ShapeMismatch,
                                SingleClass, TaskTypeMismatch, TestEmptyWarning, ZeroRange)
from molcontrast.nn import init_model
from molcontrast.train.config import TrainConfig, load_config, parse_config, require
from molcontrast.train.data import make_dataset, read_dataset_csv
from molcontrast.train.finetune import finetune, task_loss
from molcontrast.train.metrics import mae, rmse, roc_auc, scaled_error
from molcontrast.train.optim import AdamState, adam_step, cosine_lr
from molcontrast.train.pretrain import (LOG_COLUMNS, _check_cache, batch_loss, build_records, make_batch_plan,
                                        pretrain, split_corpus)
from molcontrast.train.split import scaffold_split

RINGS = ["C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "C1CCCCCC1", "c1ccccc1", "c1ccncc1", "c1ccsc1", "c1ccoc1",
         "c1ccc2ccccc2c1"]
BENZENES = ["Cc1ccccc1", "Oc1ccccc1", "Nc1ccccc1", "Fc1ccccc1", "Clc1ccccc1", "CCc1ccccc1", "OCc1ccccc1",
            "c1ccccc1"]

SMALL = dict(d=16, d_z=8, n_layers=2)


def _mols(smiles):
    return [parse_smiles(s) for s in smiles]


# --- scaffold split ---------------------------------------------------------------

def test_split_single_scaffold_goes_to_train():
    with pytest.warns(TestEmptyWarning):
        assert scaffold_split(_mols(BENZENES[:6] + ["c1ccccc1CC", "c1ccccc1CCC"])) == (list(range(8)), [], [])


def test_split_singletons():
    train, valid, test = scaffold_split(_mols(RINGS))
    assert (len(train), len(valid), len(test)) == (8, 1, 1)
    assert sorted(train + valid + test) == list(range(10))


def test_split_eight_plus_two_leaves_test_empty():
    with pytest.warns(TestEmptyWarning):
        train, valid, test = scaffold_split(_mols(BENZENES + ["CC1CCCCC1", "OC1CCCCC1"]))
    assert (train, valid, test) == (list(range(8)), [8, 9], [])


def test_split_is_deterministic_and_rejects_empty():
    mols = corpus_mols(limit=120)
    assert scaffold_split(mols, seed=0) == scaffold_split(mols, seed=99)
    with pytest.raises(EmptyDataset):
        scaffold_split([])


# --- optimisation ----------------------------------------------------------------

def test_cosine_lr():
    assert cosine_lr(0, 100, 1e-3) == 1e-3
    assert abs(cosine_lr(50, 100, 1e-3) - 5e-4) < 1e-18
    assert cosine_lr(100, 100, 1e-3) == 0.0
    values = [cosine_lr(s, 40, 1.0) for s in range(41)]
    assert values == sorted(values, reverse=True)
    for bad in ((-1, 10), (11, 10), (0, 0)):
        with pytest.raises(DomainError):
            cosine_lr(*bad, 1e-3)


def test_adam_zero_gradient_leaves_params():
    params = {"w": np.array([1.0, -2.0])}
    adam_step(params, {"w": np.zeros(2)}, AdamState(), 0.1)
    assert params["w"].tolist() == [1.0, -2.0]


def test_adam_first_step_is_lr_times_sign():
    params = {"w": np.zeros(3)}
    adam_step(params, {"w": np.array([1.0, -4.0, 0.5])}, AdamState(), 0.1)
    assert np.allclose(params["w"], [-0.1, 0.1, -0.1], atol=1e-8)


def test_adam_moments_carry_over():
    a = {"w": np.zeros(1)}
    state = AdamState()
    adam_step(a, {"w": np.array([1.0])}, state, 0.1)
    adam_step(a, {"w": np.array([-1.0])}, state, 0.1)
    # the first moment still points along +1, so the second step is damped
    assert state.t == 2 and -0.1 < a["w"][0] < 0.0


def test_weight_decay_modes():
    dec = {"w": np.array([2.0])}
    adam_step(dec, {"w": np.zeros(1)}, AdamState(), 0.1, weight_decay=0.5)
    assert dec["w"][0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)
    cou = {"w": np.array([2.0])}
    adam_step(cou, {"w": np.zeros(1)}, AdamState(), 0.1, weight_decay=0.5, decoupled=False)
    assert cou["w"][0] == pytest.approx(1.9)          # Adam normalizes the decay gradient
    assert dec["w"][0] != cou["w"][0]


def test_adam_errors():
    with pytest.raises(ShapeMismatch):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), 0.1)
    with pytest.raises(ShapeMismatch):
        adam_step({"w": np.zeros(2)}, {"v": np.zeros(2)}, AdamState(), 0.1)
    params = {"w": np.ones(2)}
    with pytest.raises(NonFiniteGrad):
        adam_step(params, {"w": np.array([np.nan, 0.0])}, AdamState(), 0.1)
    assert params["w"].tolist() == [1.0, 1.0]


# --- metrics ----------------------------------------------------------------------

def test_roc_auc_examples():
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert roc_auc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert roc_auc([4, 3, 2, 1], [0, 0, 1, 1]) == 0.0
    assert roc_auc([5, 5, 5, 5], [0, 1, 0, 1]) == 0.5
    with pytest.raises(SingleClass):
        roc_auc([0.2, 0.3], [1, 1])


def test_regression_metric_errors():
    with pytest.raises(EmptyInput):
        rmse([], [])
    with pytest.raises(EmptyInput):
        mae([], [])
    with pytest.raises(ZeroRange):
        scaled_error([1.0], [1.0], 0.0)


def test_task_loss_skips_missing_labels():
    y = np.array([[0.0, 1.0], [2.0, -1.0]])
    target = np.array([[1.0, np.nan], [0.0, 0.0]])
    loss, grad = task_loss(y, target, ("classification", "regression"))
    expected = (math.log(2.0) + (2.0 + math.log1p(math.exp(-2.0))) + 1.0) / 3
    assert loss == pytest.approx(expected)
    assert grad[0, 1] == 0.0
    assert grad[1, 1] == pytest.approx(2 * -1.0 / 3)


# --- configuration ----------------------------------------------------------------

def test_parse_config():
    cfg = parse_config("epochs = 3  # short\nlr0 = 1e-3\nweight_positive = no\n\nfeature_set = extended\n")
    assert (cfg.epochs, cfg.lr0, cfg.weight_positive, cfg.feature_set) == (3, 1e-3, False, "extended")
    assert parse_config("seed = 1", seed=5).seed == 5
    assert parse_config("seed = 1", seed=None).seed == 1


@pytest.mark.parametrize("text, fragment", [
    ("bogus = 1", "unknown config key 'bogus'"),
    ("seed = 1\nseed = 2", ":2: duplicate config key 'seed'"),
    ("seed 1", "expected 'key = value'"),
    ("epochs = many", "'epochs'"),
    ("tau = 0", "tau"),
    ("lambda1 = 2", "lambda1"),
    ("train_ratio = 0.5", "sum to 1"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text, "run.cfg")


def test_resolved_text_round_trips(tmp_path):
    cfg = TrainConfig(corpus="a.smi", epochs=7, lr0=3e-4, tau=0.07, deterministic=True)
    path = tmp_path / "config.resolved"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


def test_require_names_missing_key(tmp_path):
    with pytest.raises(ConfigError, match="'corpus'"):
        require(TrainConfig(), "corpus")
    require(TrainConfig(corpus="x.smi"), "corpus")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


# --- datasets ---------------------------------------------------------------------

def test_read_dataset_csv_with_missing_labels(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("smiles,active,logp\nCCO,1,0.5\nc1ccccc1,,2.1\n\nCC(=O)O,0,\n")
    ds = read_dataset_csv(path, "classification,regression")
    assert len(ds) == 3 and ds.columns == ("active", "logp")
    assert np.isnan(ds.labels[1, 0]) and np.isnan(ds.labels[2, 1])
    assert ds.labels[0].tolist() == [1.0, 0.5]


def test_dataset_type_checks(tmp_path):
    with pytest.raises(TaskTypeMismatch):
        make_dataset(["CC", "CO"], [0, 2], "classification")
    with pytest.raises(TaskTypeMismatch):
        make_dataset(["CC", "CO"], [[0, 1], [1, 0]], "classification,regression,regression")
    with pytest.raises(TaskTypeMismatch):
        make_dataset(["CC"], [1.0], "ranking")
    with pytest.raises(EmptyDataset):
        make_dataset([], [], "regression")
    path = tmp_path / "bad.csv"
    path.write_text("smiles,y\nCC,high\n")
    with pytest.raises(TaskTypeMismatch, match=":2:"):
        read_dataset_csv(path, "regression")


# --- pre-training -----------------------------------------------------------------

def test_split_corpus():
    train, valid = split_corpus(100, 0.05, 3)
    assert len(valid) == 5 and len(train) == 95
    assert sorted(np.concatenate([train, valid]).tolist()) == list(range(100))
    assert len(split_corpus(2, 0.05, 0)[1]) == 1
    with pytest.raises(EmptyDataset):
        split_corpus(1, 0.05, 0)


def test_records_cache_and_check():
    cfg = TrainConfig()
    mols = _mols(["CCO", "OCC", "CCO", "Cc1ccccc1"])
    records = build_records(mols, cfg)
    assert records[0].fp is records[1].fp            # fingerprints shared across aliases
    assert records[0].graph is records[2].graph      # graphs shared by identical input
    assert records[0].graph is not records[1].graph
    records[3].fp = records[0].fp
    with pytest.raises(RuntimeError, match="cache mismatch"):
        for seed in range(20):                        # the check samples one record per call
            _check_cache(records, cfg.replace(seed=seed))


def test_every_touched_tensor_gets_gradient():
    cfg = TrainConfig(**SMALL, batch_size=4)
    mols = _mols(["CCOC(=O)c1ccccc1", "CC(=O)Nc1ccc(O)cc1", "c1ccccc1Oc1ccccc1", "CCN(CC)CC"])
    records = build_records(mols, cfg)
    model = init_model("original", 16, 8, 2, seed=0, dtype=np.float64)
    plan = make_batch_plan(records, [0, 1, 2, 3], 5, cfg)
    _, _, _, grads = batch_loss(model, plan, cfg)
    norms = {k: float(np.linalg.norm(g)) for k, g in grads.items()}
    assert norms and all(v > 0 for v in norms.values()), norms


def test_pretrain_smoke(tmp_path):
    cfg = TrainConfig(d=64, d_z=32, n_layers=3, batch_size=16, epochs=6, lr0=1e-3, seed=0)
    result = pretrain(corpus_mols(limit=64), cfg, tmp_path)
    assert result.epoch_losses[-1] < result.epoch_losses[0]
    assert all(math.isfinite(v) for v in result.valid_losses)
    header = (tmp_path / "train_log.csv").read_text().splitlines()[0]
    assert header == ",".join(LOG_COLUMNS)
    assert (tmp_path / "model.ckpt").exists()
    assert "epochs = 6" in (tmp_path / "config.resolved").read_text()


@pytest.mark.parametrize("changes", [{"lambda1": 0.0}, {"lambda2": 0.0}, {"fragment_head": "separate"},
                                     {"max_fragments": 2}])
def test_pretrain_variants_are_finite(changes):
    cfg = TrainConfig(**SMALL, batch_size=8, epochs=1, seed=1).replace(**changes)
    result = pretrain(corpus_mols(limit=20), cfg)
    assert all(math.isfinite(v) for v in result.epoch_losses + result.valid_losses)
    if changes.get("lambda2") == 0.0:
        assert all(row[5] == 0.0 for row in result.log_rows)


def test_pretrain_reduces_batch_for_small_corpus(caplog):
    cfg = TrainConfig(**SMALL, batch_size=512, epochs=1)
    result = pretrain(corpus_mols(limit=10), cfg)
    assert len(result.log_rows) == 1
    assert "batch size reduced" in caplog.text


# --- fine-tuning ------------------------------------------------------------------

def _labelled(n=40, kind="regression"):
    mols = corpus_mols(limit=n)
    smiles = [m.source_smiles for m in mols]
    values = np.array([m.n_atoms for m in mols], dtype=float)
    if kind == "classification":
        values = (values > np.median(values)).astype(float)
    return make_dataset(smiles, values, kind)


def test_finetune_with_empty_test_split(tmp_path):
    ds = _labelled(30)
    cfg = TrainConfig(**SMALL, batch_size=8, epochs=3)
    result = finetune(ds, cfg, tmp_path, split=(list(range(24)), list(range(24, 30)), []))
    assert result.report["test"] is None
    assert result.report["sizes"] == [24, 6, 0]
    assert set(result.report["valid"]) >= {"rmse", "mae", "n"}
    assert (tmp_path / "metrics.json").exists() and (tmp_path / "model.ckpt").exists()


def test_finetune_frozen_encoder_fits_separable_labels():
    ds = _labelled(40, "classification")
    base = init_model("original", 32, 16, 2, seed=3)
    cfg = TrainConfig(batch_size=40, epochs=200, lr0=1e-2, encoder_lr=0.0, weight_decay=0.0)
    before = {k: v.copy() for k, v in base.params.items()}
    result = finetune(ds, cfg, model=base, split=(list(range(40)), [], []))
    assert result.report["train"]["roc_auc"] > 0.9
    graphs = [featurize(m, result.model.feature_set) for m in ds.mols]
    assert task_loss(result.predict(graphs), ds.labels, ds.task_types)[0] < 0.1
    for k in result.model.encoder_keys():
        assert np.array_equal(result.model.params[k], before[k])


def test_finetune_rejects_empty_train():
    with pytest.raises(EmptyDataset):
        finetune(_labelled(10), TrainConfig(**SMALL, epochs=1), split=([], list(range(10)), []))
