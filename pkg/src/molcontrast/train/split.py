"""Scaffold split."""

from __future__ import annotations

import warnings
from collections import defaultdict

from ..errors import EmptyDataset, TestEmptyWarning
from ..fragment import murcko_scaffold


def scaffold_groups(mols) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = defaultdict(list)
    for i, mol in enumerate(mols):
        groups[murcko_scaffold(mol)].append(i)
    return dict(groups)


def scaffold_split(ds, ratios=(0.8, 0.1, 0.1), seed=None) -> tuple[list[int], list[int], list[int]]:
    """Assign whole scaffold groups to train, valid and test.

    Groups are visited by descending size, then key. A group joins train while
    train holds fewer than ``ratios[0] * n`` molecules, else valid while valid
    holds fewer than ``ratios[1] * n``, else test. ``seed`` is accepted for
    interface symmetry; the split is deterministic.

    Args:
        ds: A Dataset, or any sequence of MolGraph.
        ratios: Train, valid and test fractions.

    Returns:
        Sorted index lists (train, valid, test).
    """
    mols = getattr(ds, "mols", ds)
    n = len(mols)
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    groups = scaffold_groups(mols)
    order = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    train, valid, test = [], [], []
    for _, members in order:
        if len(train) < ratios[0] * n:
            train.extend(members)
        elif len(valid) < ratios[1] * n:
            valid.extend(members)
        else:
            test.extend(members)
    if not test:
        warnings.warn(TestEmptyWarning(f"scaffold split left the test set empty ({len(train)}/{len(valid)}/0)"))
    return sorted(train), sorted(valid), sorted(test)
