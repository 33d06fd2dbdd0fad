"""Contrastive pre-training loop."""

from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import augment
from ..chem import canonical_smiles, featurize
from ..chem.features import FeaturizedGraph
from ..chem.graph import MolGraph
from ..errors import EmptyDataset, NonFinite
from ..fingerprint import Fingerprint, NegWeightMatrix, ecfp, weight_matrix_from_fingerprints
from ..fragment import FragmentMap, brics_partition
from ..loss import FragmentPairIndex, fragment_nt_xent, total_loss, weighted_nt_xent
from ..nn import GinModel, atomic_write, backward, collate, forward, init_model, save_checkpoint
from ..nn.batch import GraphBatch
from ..nn.model import head_params
from .config import TrainConfig
from .optim import AdamState, adam_step, cosine_lr

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "epoch", "lr", "loss_total", "loss_mol", "loss_frag")
PRETRAIN_EPOCHS = 50


@dataclass
class MolRecord:
    """Per-molecule data computed once and reused every epoch."""

    mol: MolGraph
    graph: FeaturizedGraph
    fp: Fingerprint
    fragments: FragmentMap


@dataclass
class BatchPlan:
    """One contrastive batch: 2N views, their weights and fragment pairs.

    View ``2n`` and ``2n + 1`` (0-based) come from molecule ``n``.
    """

    sources: list[int]
    batch: GraphBatch
    weights: NegWeightMatrix
    pairs: FragmentPairIndex
    fragment_rows: np.ndarray   # rows of the pooled fragment matrix that enter the loss
    batch_seed: int


@dataclass
class PretrainResult:
    model: GinModel
    epoch_losses: list[float]
    valid_losses: list[float]
    best_epoch: int
    log_rows: list[tuple] = field(default_factory=list)
    out_dir: Path | None = None


def derive_seed(*words: int) -> int:
    return int(np.random.SeedSequence(list(words)).generate_state(1, dtype=np.uint64)[0])


def build_records(mols: Sequence[MolGraph], cfg: TrainConfig) -> list[MolRecord]:
    """Featurize, fingerprint and fragment each molecule, caching by SMILES identity.

    Fingerprints are keyed by canonical SMILES since they ignore atom order;
    graphs and fragment maps by the input SMILES since they depend on it.
    """
    fp_cache: dict[str, Fingerprint] = {}
    frag_cache: dict[str, tuple[FeaturizedGraph, FragmentMap]] = {}

    def one(mol: MolGraph) -> MolRecord:
        key = canonical_smiles(mol)
        fp = fp_cache.get(key)
        if fp is None:
            fp = fp_cache.setdefault(key, ecfp(mol, cfg.radius, cfg.nbits))
        entry = frag_cache.get(mol.source_smiles) if mol.source_smiles else None
        if entry is None:
            entry = (featurize(mol, cfg.feature_set), brics_partition(mol))
            if mol.source_smiles:
                frag_cache.setdefault(mol.source_smiles, entry)
        return MolRecord(mol, entry[0], fp, entry[1])

    workers = 1 if cfg.deterministic else cfg.workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(one, mols))
    else:
        records = [one(m) for m in mols]
    _check_cache(records, cfg)
    return records


def _check_cache(records: Sequence[MolRecord], cfg: TrainConfig) -> None:
    """Recompute 1% of cached entries (at least one) and compare."""
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    picks = rng.choice(len(records), size=max(1, len(records) // 100), replace=False)
    for i in picks:
        rec = records[int(i)]
        if ecfp(rec.mol, cfg.radius, cfg.nbits) != rec.fp or brics_partition(rec.mol) != rec.fragments:
            raise RuntimeError(f"cache mismatch for molecule {rec.mol.source_smiles!r}")


def make_batch_plan(records: Sequence[MolRecord], sources: Sequence[int], batch_seed: int,
                    cfg: TrainConfig) -> BatchPlan:
    views, assignments, counts, rows, offset = [], [], [], [], 0
    cap = cfg.max_fragments
    for pos, src in enumerate(sources):
        rec = records[src]
        n_frag = rec.fragments.n_fragments
        kept = min(n_frag, cap) if cap > 0 else n_frag
        counts.append(kept)
        for view in (0, 1):
            spec = augment.sample_augmentation(rec.mol, augment.view_seed(batch_seed, pos, view),
                                               cfg.mask_rate, cfg.delete_rate)
            views.append(augment.apply(rec.graph, spec))
            assignments.append(rec.fragments.assignment)
            rows.extend(range(offset, offset + kept))
            offset += n_frag
    weights = weight_matrix_from_fingerprints([records[s].fp for s in sources], cfg.lambda1, views=2)
    return BatchPlan(list(sources), collate(views, assignments), weights, FragmentPairIndex.from_counts(counts),
                     np.asarray(rows, dtype=np.int64), batch_seed)


def ensure_fragment_head(model: GinModel, cfg: TrainConfig) -> None:
    if cfg.fragment_head == "separate" and "fproj.w1" not in model.params:
        rng = np.random.default_rng(derive_seed(cfg.seed, 2))
        model.params.update(head_params(rng, "fproj", model.d, model.d_h, model.d_z, model.dtype))


def batch_loss(model: GinModel, plan: BatchPlan, cfg: TrainConfig, grads: bool = True):
    """Forward (and optionally backward) pass of the combined loss on one plan.

    Returns:
        (total, molecule term, fragment term, gradient dict or None)
    """
    use_frag = cfg.lambda2 > 0
    branches = ("mol", "frag") if use_frag else ("mol",)
    head = {"mol": "proj", "frag": "fproj" if cfg.fragment_head == "separate" else "proj"}
    outputs, trace = forward(model, plan.batch, branches, head)
    l_mol, dz = weighted_nt_xent(outputs["mol"], plan.weights, cfg.tau, cfg.weight_positive)
    l_frag, upstream = 0.0, {"mol": dz}
    if use_frag:
        zf = outputs["frag"]
        l_frag, dzf_rows = fragment_nt_xent(zf[plan.fragment_rows], plan.pairs, cfg.tau)
        dzf = np.zeros_like(zf)
        dzf[plan.fragment_rows] = cfg.lambda2 * dzf_rows
        upstream["frag"] = dzf
    total = total_loss(l_mol, l_frag, cfg.lambda2)
    return total, l_mol, l_frag, backward(model, trace, upstream) if grads else None


def split_corpus(n: int, valid_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random train/valid split with at least one molecule on each side."""
    if n < 2:
        raise EmptyDataset(f"pre-training needs at least 2 molecules, got {n}")
    perm = np.random.default_rng(derive_seed(seed, 0)).permutation(n)
    n_valid = min(n - 1, max(1, int(math.floor(valid_fraction * n + 0.5))))
    return np.sort(perm[n_valid:]), np.sort(perm[:n_valid])


def _dump_nonfinite(out_dir: Path | None, info: dict) -> None:
    if out_dir is not None:
        atomic_write(out_dir / "nonfinite_batch.json", json.dumps(info, indent=1, sort_keys=True).encode())


def _write_log(path: Path, rows: list[tuple]) -> None:
    buf = io.StringIO()
    buf.write(",".join(LOG_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    atomic_write(path, buf.getvalue().encode("utf-8"))


def validation_loss(model: GinModel, records, valid_idx, cfg: TrainConfig) -> float:
    """Mean combined loss over fixed-seed validation batches."""
    if len(valid_idx) == 0:
        return float("nan")
    size = min(cfg.batch_size, len(valid_idx))
    losses, weights = [], []
    for b, start in enumerate(range(0, len(valid_idx), size)):
        chunk = list(valid_idx[start:start + size])
        plan = make_batch_plan(records, chunk, derive_seed(cfg.seed, 3, b), cfg)
        total, _, _, _ = batch_loss(model, plan, cfg, grads=False)
        losses.append(total)
        weights.append(len(chunk))
    return float(np.average(losses, weights=weights))


def pretrain(mols: Sequence[MolGraph], cfg: TrainConfig, out_dir=None, model: GinModel | None = None) -> PretrainResult:
    """Pre-train an encoder with the weighted molecule loss plus fragment contrast.

    Args:
        mols: Parsed corpus; at least two molecules.
        cfg: Run configuration. ``epochs = 0`` means the default of 50.
        out_dir: If given, receives ``model.ckpt`` (best validation loss),
            ``train_log.csv`` and ``config.resolved``.
        model: Optional starting model; a fresh one is built from ``cfg`` otherwise.

    Returns:
        A PretrainResult holding the best model and per-epoch losses.
    """
    out_dir = Path(out_dir) if out_dir else None
    epochs = cfg.epochs or PRETRAIN_EPOCHS
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(out_dir / "config.resolved", cfg.replace(epochs=epochs).to_text().encode("utf-8"))
    records = build_records(mols, cfg)
    train_idx, valid_idx = split_corpus(len(records), cfg.valid_fraction, cfg.seed)
    batch_size = min(cfg.batch_size, len(train_idx))
    if batch_size < cfg.batch_size:
        log.warning("training split has %d molecules; batch size reduced from %d", len(train_idx), cfg.batch_size)
    per_epoch = len(train_idx) // batch_size
    total_steps = cfg.cosine_horizon or epochs * per_epoch
    if model is None:
        model = init_model(cfg.feature_set, cfg.d, cfg.d_z, cfg.n_layers, cfg.seed, np.float32, cfg.d_h or None)
    ensure_fragment_head(model, cfg)
    state = AdamState()
    log_rows: list[tuple] = []
    epoch_losses, valid_losses = [], []
    best = (math.inf, -1, None)
    step = 0
    for epoch in range(epochs):
        order = np.random.default_rng(derive_seed(cfg.seed, 4, epoch)).permutation(train_idx)
        seen = []
        for b in range(per_epoch):
            sources = [int(i) for i in order[b * batch_size:(b + 1) * batch_size]]
            batch_seed = derive_seed(cfg.seed, 5, epoch, b)
            plan = make_batch_plan(records, sources, batch_seed, cfg)
            try:
                total, l_mol, l_frag, grads = batch_loss(model, plan, cfg)
            except NonFinite as exc:
                _dump_nonfinite(out_dir, {"epoch": epoch, "step": step, "batch_seed": batch_seed,
                                          "smiles": [records[s].mol.source_smiles for s in sources],
                                          "error": str(exc)})
                raise NonFinite(f"{exc} (epoch {epoch}, step {step}, batch seed {batch_seed})") from None
            lr = cosine_lr(min(step, total_steps), total_steps, cfg.lr0)
            adam_step(model.params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay,
                      cfg.decoupled_weight_decay)
            log_rows.append((step, epoch, lr, total, l_mol, l_frag))
            seen.append(total)
            step += 1
        epoch_losses.append(float(np.mean(seen)))
        v = validation_loss(model, records, valid_idx, cfg)
        valid_losses.append(v)
        log.info("epoch %d train %.4f valid %.4f", epoch, epoch_losses[-1], v)
        if v < best[0] or best[2] is None:
            best = (v, epoch, model.copy())
            if out_dir is not None:
                save_checkpoint(best[2], out_dir / "model.ckpt", {"epoch": epoch, "valid_loss": v, "seed": cfg.seed})
        if out_dir is not None:
            _write_log(out_dir / "train_log.csv", log_rows)
    best_model = best[2] if best[2] is not None else model
    if out_dir is not None and best[2] is None:
        save_checkpoint(best_model, out_dir / "model.ckpt", {"epoch": -1, "seed": cfg.seed})
        _write_log(out_dir / "train_log.csv", log_rows)
    return PretrainResult(best_model, epoch_losses, valid_losses, best[1], log_rows, out_dir)
