"""Fine-tuning a pre-trained encoder with a fresh prediction head."""

from __future__ import annotations

import io
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..chem import featurize
from ..errors import CheckpointError, EmptyDataset, NonFinite, SingleClass
from ..nn import GinModel, atomic_write, attach_prediction_head, backward, forward, init_model, save_checkpoint
from ..nn.checkpoint import load_checkpoint
from ..nn.model import head_backward, head_forward, set_head_input_norm, zero_grads
from .config import TrainConfig
from .data import Dataset
from .metrics import mae, rmse, roc_auc, scaled_error
from .optim import AdamState, adam_step, cosine_lr
from .pretrain import derive_seed
from .split import scaffold_split

log = logging.getLogger(__name__)

FINETUNE_EPOCHS = 100


@dataclass
class FinetuneResult:
    model: GinModel
    report: dict
    split: tuple[list[int], list[int], list[int]]
    label_mean: np.ndarray
    label_std: np.ndarray

    def predict(self, graphs) -> np.ndarray:
        """Predictions in label units (regression de-standardized, classification logits)."""
        y = forward(self.model, graphs, ("mol",), "pred")[0]["mol"].astype(np.float64)
        return y * self.label_std + self.label_mean


def _label_scaling(ds: Dataset, train_idx) -> tuple[np.ndarray, np.ndarray]:
    """Standardize regression columns on the training split; classification passes through."""
    mean = np.zeros(ds.n_tasks)
    std = np.ones(ds.n_tasks)
    labels = ds.labels[train_idx]
    for col, kind in enumerate(ds.task_types):
        present = labels[~np.isnan(labels[:, col]), col]
        if kind == "regression" and present.size:
            mean[col] = present.mean()
            spread = present.std()
            std[col] = spread if spread > 0 else 1.0
    return mean, std


def task_loss(y: np.ndarray, target: np.ndarray, task_types) -> tuple[float, np.ndarray]:
    """Mean per-label loss over present labels and its gradient w.r.t. ``y``.

    Classification uses binary cross-entropy on logits, regression squared error.
    """
    present = ~np.isnan(target)
    count = int(present.sum())
    if count == 0:
        return 0.0, np.zeros_like(y)
    t = np.where(present, target, 0.0)
    y64 = y.astype(np.float64)
    cls = np.array([k == "classification" for k in task_types])[None, :]
    bce = np.maximum(y64, 0) - y64 * t + np.log1p(np.exp(-np.abs(y64)))
    sq = (y64 - t) ** 2
    per = np.where(cls, bce, sq)
    grad = np.where(cls, 1.0 / (1.0 + np.exp(-y64)) - t, 2.0 * (y64 - t))
    loss = float(per[present].sum() / count)
    return loss, (np.where(present, grad, 0.0) / count).astype(y.dtype)


def evaluate(result_model: GinModel, graphs, labels: np.ndarray, task_types, mean, std, label_range) -> dict | None:
    """Metrics on one split; None when the split is empty."""
    if len(graphs) == 0:
        return None
    y = forward(result_model, graphs, ("mol",), "pred")[0]["mol"].astype(np.float64) * std + mean
    out: dict = {"n": len(graphs)}
    aucs, rmses, maes, scaled = [], [], [], []
    for col, kind in enumerate(task_types):
        present = ~np.isnan(labels[:, col])
        if not present.any():
            continue
        if kind == "classification":
            try:
                aucs.append(roc_auc(y[present, col], labels[present, col]))
            except SingleClass:
                continue
        else:
            rmses.append(rmse(y[present, col], labels[present, col]))
            maes.append(mae(y[present, col], labels[present, col]))
            if label_range[col] > 0:
                scaled.append(scaled_error(y[present, col], labels[present, col], label_range[col]))
    if aucs:
        out["roc_auc"] = float(np.mean(aucs))
    if rmses:
        out["rmse"] = float(np.mean(rmses))
        out["mae"] = float(np.mean(maes))
    if scaled:
        out["scaled_rmse"] = float(np.mean(scaled))
    return out


def _selection_metric(cfg: TrainConfig, task_types) -> tuple[str, int]:
    """Metric name and direction (+1 maximize, -1 minimize)."""
    name = cfg.metric
    if name == "auto":
        name = "roc_auc" if all(k == "classification" for k in task_types) else "rmse"
    return name, (1 if name == "roc_auc" else -1)


def start_model(cfg: TrainConfig, n_targets: int) -> GinModel:
    if cfg.checkpoint:
        base, _ = load_checkpoint(cfg.checkpoint)
        if base.feature_set != cfg.feature_set:
            raise CheckpointError(f"checkpoint uses feature set {base.feature_set!r}, config {cfg.feature_set!r}")
    else:
        base = init_model(cfg.feature_set, cfg.d, cfg.d_z, cfg.n_layers, cfg.seed, np.float32, cfg.d_h or None)
    return attach_prediction_head(base, n_targets, derive_seed(cfg.seed, 6))


def finetune(ds: Dataset, cfg: TrainConfig, out_dir=None, model: GinModel | None = None,
             split=None) -> FinetuneResult:
    """Train a prediction head (and optionally the encoder) on a labelled dataset.

    Args:
        ds: Dataset with declared task types.
        cfg: Run configuration. ``epochs = 0`` means 100. ``encoder_lr = 0``
            freezes the encoder.
        out_dir: If given, receives ``model.ckpt``, ``metrics.json``,
            ``train_log.csv`` and ``config.resolved``.
        model: Starting encoder; otherwise taken from ``cfg.checkpoint`` or random.
        split: Optional (train, valid, test) indices; scaffold split otherwise.

    Returns:
        FinetuneResult with the selected model and a metrics report whose test
        entry is None when the test split is empty.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot fine-tune on an empty dataset")
    out_dir = Path(out_dir) if out_dir else None
    epochs = cfg.epochs or FINETUNE_EPOCHS
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(out_dir / "config.resolved", cfg.replace(epochs=epochs).to_text().encode("utf-8"))
    if split is None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            split = scaffold_split(ds, (cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio))
        for w in caught:
            log.warning("%s", w.message)
    train_idx, valid_idx, test_idx = (list(s) for s in split)
    if not train_idx:
        raise EmptyDataset("training split is empty")
    model = attach_prediction_head(model, ds.n_tasks, derive_seed(cfg.seed, 6)) if model is not None \
        else start_model(cfg, ds.n_tasks)
    graphs = [featurize(m, model.feature_set) for m in ds.mols]
    mean, std = _label_scaling(ds, train_idx)
    scaled = (ds.labels - mean) / std
    label_range = np.nanmax(ds.labels, axis=0) - np.nanmin(ds.labels, axis=0)

    encoder_lr = cfg.lr0 if cfg.encoder_lr < 0 else cfg.encoder_lr
    train_encoder = encoder_lr > 0
    lrs = {k: (encoder_lr if k in model.encoder_keys() else cfg.lr0) for k in model.params}
    metric, sign = _selection_metric(cfg, ds.task_types)
    # a frozen encoder gives fixed graph representations, so compute them once
    pooled = forward(model, graphs, ("mol",), None)[0]["mol"]
    frozen = None if train_encoder else pooled
    if cfg.head_input_norm:
        set_head_input_norm(model, pooled[train_idx])
    trainable = set(model.trainable_keys())
    state = AdamState()
    best_score, best_model, best_epoch = -math.inf, model.copy(), -1
    log_rows = []
    step = 0
    per_epoch = -(-len(train_idx) // cfg.batch_size)
    total_steps = cfg.cosine_horizon or epochs * per_epoch
    for epoch in range(epochs):
        order = np.random.default_rng(derive_seed(cfg.seed, 7, epoch)).permutation(train_idx)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = [int(i) for i in order[start:start + cfg.batch_size]]
            if train_encoder:
                out, trace = forward(model, [graphs[i] for i in idx], ("mol",), "pred")
                y = out["mol"]
            else:
                y, cache = head_forward(model, "pred", frozen[idx])
            loss, dy = task_loss(y, scaled[idx], ds.task_types)
            if not math.isfinite(loss):
                raise NonFinite(f"non-finite fine-tuning loss at epoch {epoch}, step {step}")
            if train_encoder:
                grads = backward(model, trace, {"mol": dy})
                grads = {k: g for k, g in grads.items() if k in trainable}
            else:
                grads = zero_grads(model, model.head_keys("pred"))
                head_backward(model, cache, dy, grads)
            scale = 1.0
            if cfg.finetune_schedule == "cosine":
                scale = cosine_lr(min(step, total_steps), total_steps, 1.0)
            step_lrs = {k: v * scale for k, v in lrs.items()}
            adam_step(model.params, grads, state, step_lrs, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay,
                      cfg.decoupled_weight_decay)
            log_rows.append((step, epoch, cfg.lr0 * scale, loss))
            losses.append(loss)
            step += 1
        sel_idx = valid_idx or train_idx
        report = evaluate(model, [graphs[i] for i in sel_idx], ds.labels[sel_idx], ds.task_types, mean, std,
                          label_range)
        score = report.get(metric) if report else None
        if score is not None and sign * score > best_score:
            best_score, best_model, best_epoch = sign * score, model.copy(), epoch
        elif best_epoch < 0 and score is None:
            best_model, best_epoch = model.copy(), epoch
        log.info("epoch %d loss %.4f %s %s", epoch, float(np.mean(losses)), metric, score)

    def split_report(idx):
        return evaluate(best_model, [graphs[i] for i in idx], ds.labels[idx], ds.task_types, mean, std, label_range)

    report = {
        "selection_metric": metric,
        "best_epoch": best_epoch,
        "train": split_report(train_idx),
        "valid": split_report(valid_idx),
        "test": split_report(test_idx),
        "sizes": [len(train_idx), len(valid_idx), len(test_idx)],
    }
    if out_dir is not None:
        meta = {"label_mean": mean.tolist(), "label_std": std.tolist(), "task_types": list(ds.task_types),
                "best_epoch": best_epoch}
        save_checkpoint(best_model, out_dir / "model.ckpt", meta)
        atomic_write(out_dir / "metrics.json", json.dumps(report, indent=1, sort_keys=True).encode("utf-8"))
        buf = io.StringIO()
        buf.write("step,epoch,lr,loss\n")
        for row in log_rows:
            buf.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
        atomic_write(out_dir / "train_log.csv", buf.getvalue().encode("utf-8"))
    return FinetuneResult(best_model, report, (train_idx, valid_idx, test_idx), mean, std)
