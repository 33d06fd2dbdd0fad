"""Evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import EmptyInput, SingleClass, ZeroRange


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney U statistic; ties count 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks resolve ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _pair(preds, labels):
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.size == 0:
        raise EmptyInput("no predictions to score")
    if preds.shape != labels.shape:
        raise ValueError(f"prediction shape {preds.shape} != label shape {labels.shape}")
    return preds, labels


def rmse(preds, labels) -> float:
    preds, labels = _pair(preds, labels)
    return float(np.sqrt(np.mean((preds - labels) ** 2)))


def mae(preds, labels) -> float:
    preds, labels = _pair(preds, labels)
    return float(np.mean(np.abs(preds - labels)))


def scaled_error(preds, labels, label_range: float, kind: str = "rmse") -> float:
    """RMSE or MAE divided by the label range."""
    if not label_range > 0:
        raise ZeroRange(f"label range must be > 0, got {label_range}")
    err = rmse(preds, labels) if kind == "rmse" else mae(preds, labels)
    return err / label_range
