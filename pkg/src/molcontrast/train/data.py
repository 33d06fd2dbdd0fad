"""Labelled datasets and SMILES corpora."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..chem import parse_smiles, read_smiles_file
from ..chem.graph import MolGraph
from ..errors import EmptyDataset, SmilesError, TaskTypeMismatch

TASK_TYPES = ("classification", "regression")


@dataclass
class Dataset:
    smiles: list[str]
    labels: np.ndarray          # (n, n_tasks) float64, NaN marks a missing label
    task_types: tuple[str, ...]
    columns: tuple[str, ...]
    mols: list[MolGraph]

    def __len__(self) -> int:
        return len(self.smiles)

    @property
    def n_tasks(self) -> int:
        return self.labels.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset([self.smiles[i] for i in idx], self.labels[idx], self.task_types, self.columns,
                       [self.mols[i] for i in idx])


def parse_task_types(text: str, n_columns: int) -> tuple[str, ...]:
    kinds = tuple(t.strip() for t in text.split(",") if t.strip())
    if len(kinds) == 1:
        kinds = kinds * n_columns
    if len(kinds) != n_columns:
        raise TaskTypeMismatch(f"{len(kinds)} task types declared for {n_columns} label columns")
    for kind in kinds:
        if kind not in TASK_TYPES:
            raise TaskTypeMismatch(f"unknown task type {kind!r}; use one of {TASK_TYPES}")
    return kinds


def make_dataset(smiles, labels, task_types, columns=None) -> Dataset:
    """Parse SMILES and check labels against their declared task types."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 1:
        labels = labels[:, None]
    if len(smiles) == 0:
        raise EmptyDataset("dataset has no rows")
    if labels.shape[0] != len(smiles) or labels.shape[1] < 1:
        raise TaskTypeMismatch(f"labels shape {labels.shape} does not fit {len(smiles)} molecules")
    if isinstance(task_types, str):
        task_types = parse_task_types(task_types, labels.shape[1])
    task_types = tuple(task_types)
    if len(task_types) != labels.shape[1]:
        raise TaskTypeMismatch(f"{len(task_types)} task types for {labels.shape[1]} label columns")
    for col, kind in enumerate(task_types):
        present = labels[~np.isnan(labels[:, col]), col]
        if kind == "classification" and not np.all(np.isin(present, (0.0, 1.0))):
            raise TaskTypeMismatch(f"classification column {col} has labels other than 0/1")
    columns = tuple(columns) if columns else tuple(f"task{i}" for i in range(labels.shape[1]))
    mols = [parse_smiles(s) for s in smiles]
    return Dataset(list(smiles), labels, task_types, columns, mols)


def read_dataset_csv(path, task_types: str) -> Dataset:
    """CSV with a ``smiles`` column; other columns are labels, empty cells missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        if "smiles" not in header:
            raise EmptyDataset(f"{path} has no 'smiles' column")
        s_col = header.index("smiles")
        label_cols = [i for i in range(len(header)) if i != s_col]
        if not label_cols:
            raise TaskTypeMismatch(f"{path} has no label columns")
        smiles, rows = [], []
        for lineno, row in enumerate(reader, 2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise EmptyDataset(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            smiles.append(row[s_col].strip())
            try:
                rows.append([float(row[i]) if row[i].strip() else np.nan for i in label_cols])
            except ValueError as exc:
                raise TaskTypeMismatch(f"{path}:{lineno}: {exc}") from None
    try:
        return make_dataset(smiles, np.array(rows).reshape(len(rows), len(label_cols)), task_types,
                            [header[i] for i in label_cols])
    except SmilesError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def read_corpus(path) -> list[tuple[int, str, MolGraph]]:
    """Parse a SMILES file; errors name the offending line."""
    out = []
    for lineno, smi in read_smiles_file(path):
        try:
            out.append((lineno, smi, parse_smiles(smi)))
        except SmilesError as exc:
            raise type(exc)(f"{Path(path).name} line {lineno}: {exc}") from None
    return out
