"""Shared oracles and builders for the test suite."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from molcontrast.chem import FeaturizedGraph, parse_smiles
from molcontrast.loss import fragment_nt_xent, nt_xent, weighted_nt_xent
from molcontrast.nn import backward, forward
from molcontrast.train.pretrain import batch_loss

DATA = Path(__file__).parent / "data"


def read_smi(name: str) -> list[str]:
    """SMILES column of a corpus file, skipping comments and blank lines."""
    out = []
    for line in (DATA / name).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line.split()[0])
    return out


def corpus_mols(name: str = "corpus512.smi", limit: int | None = None):
    smiles = read_smi(name)[:limit]
    return [parse_smiles(s) for s in smiles]


def permute_graph(fg: FeaturizedGraph, perm: np.ndarray) -> FeaturizedGraph:
    """Relabel atoms so that new atom ``i`` is old atom ``perm[i]``; arcs are shuffled too."""
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    rng = np.random.default_rng(len(perm))
    arc_order = rng.permutation(fg.n_arcs)
    return replace(
        fg,
        node_codes=fg.node_codes[perm],
        edge_codes=fg.edge_codes[arc_order],
        arcs=inv[fg.arcs[arc_order]],
        arc_bond=fg.arc_bond[arc_order],
        masked=fg.masked[perm],
    )


def pairwise_auc(scores, labels) -> float:
    """O(n^2) Mann-Whitney oracle: fraction of (pos, neg) pairs ranked correctly, ties 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


# --- gradient checking -------------------------------------------------------

LOSS_KINDS = ("nt_xent", "weighted", "fragment", "total")


def loss_and_grads(model, plan, cfg, kind: str):
    """Loss through encode, readout and projection, plus analytic parameter gradients."""
    if kind == "total":
        total, _, _, grads = batch_loss(model, plan, cfg)
        return total, grads
    if kind == "fragment":
        out, trace = forward(model, plan.batch, ("frag",), "proj")
        zf = out["frag"]
        loss, d_rows = fragment_nt_xent(zf[plan.fragment_rows], plan.pairs, cfg.tau)
        dzf = np.zeros_like(zf)
        dzf[plan.fragment_rows] = d_rows
        return loss, backward(model, trace, {"frag": dzf})
    out, trace = forward(model, plan.batch, ("mol",), "proj")
    if kind == "nt_xent":
        loss, dz = nt_xent(out["mol"], cfg.tau)
    else:
        loss, dz = weighted_nt_xent(out["mol"], plan.weights, cfg.tau, cfg.weight_positive)
    return loss, backward(model, trace, {"mol": dz})


def numeric_grads(model, plan, cfg, kind: str, step: float = 1e-4) -> dict[str, np.ndarray]:
    """Five-point central differences over every coordinate of every trainable tensor.

    The fourth-order stencil keeps truncation error far below the tolerance at
    ``step = 1e-4``; the plain two-point rule is dominated by it for the sharp
    tau = 0.1 softmax.
    """
    out = {}
    for key in model.trainable_keys():
        p = model.params[key]
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            vals = []
            for k in (2, 1, -1, -2):
                flat[i] = old + k * step
                vals.append(_loss_only(model, plan, cfg, kind))
            flat[i] = old
            gflat[i] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * step)
        out[key] = g
    return out


def _loss_only(model, plan, cfg, kind):
    if kind == "total":
        return batch_loss(model, plan, cfg, grads=False)[0]
    if kind == "fragment":
        zf = forward(model, plan.batch, ("frag",), "proj")[0]["frag"]
        return fragment_nt_xent(zf[plan.fragment_rows], plan.pairs, cfg.tau)[0]
    z = forward(model, plan.batch, ("mol",), "proj")[0]["mol"]
    if kind == "nt_xent":
        return nt_xent(z, cfg.tau)[0]
    return weighted_nt_xent(z, plan.weights, cfg.tau, cfg.weight_positive)[0]


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-6) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over all coordinates."""
    worst = 0.0
    for key, n in numeric.items():
        a = analytic[key]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def kink_margin(trace) -> float:
    """Smallest |x| over every rectifier input recorded in a ForwardTrace."""
    vals = []
    layers = trace.encoder.layers
    for k, layer in enumerate(layers):
        vals += [layer.pre, layer.u1]
        if k < len(layers) - 1:
            vals.append(layer.u2)
    vals += [br.head.u for br in trace.branches.values() if br.head is not None]
    return float(min(np.min(np.abs(v)) for v in vals))


def min_preactivation(model, plan) -> float:
    """Kink distance of a pre-training forward pass over both branches."""
    return kink_margin(forward(model, plan.batch, ("mol", "frag"), "proj")[1])
