"""Contrastive losses over cosine similarities, with exact gradients.

All three losses share one kernel. For anchor i with positive partner j::

    L_i = -s_ij / tau + log sum_{k != i} exp(w_ik * s_ik / tau)

where s is cosine similarity and w the negative-pair weight (all ones for
plain NT-Xent). The reported loss is the mean over anchors. Log-sum-exp
subtracts the per-anchor maximum, so small temperatures do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NonFinite, UnpairedRow, WeightShapeMismatch, ZeroVector
from .fingerprint import NegWeightMatrix

ZERO_NORM = 1e-12


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.1
    lambda1: float = 0.5
    lambda2: float = 0.5
    weight_positive: bool = True  # literal reading: the partner's denominator term is weighted too

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if not 0.0 <= self.lambda1 <= 1.0:
            raise DomainError(f"lambda1 must lie in [0, 1], got {self.lambda1}")
        # 0 is allowed so the plain molecule-level baseline can be run
        if not 0.0 <= self.lambda2 <= 1.0:
            raise DomainError(f"lambda2 must lie in [0, 1], got {self.lambda2}")


@dataclass(frozen=True)
class FragmentPairIndex:
    """Positive fragment pairs ``(row_a, row_b)`` over 2M fragment rows."""

    pairs: tuple[tuple[int, int], ...]
    n_rows: int

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "FragmentPairIndex":
        """Pairs for rows laid out molecule by molecule, view A's fragments then view B's."""
        pairs, row = [], 0
        for m in counts:
            pairs.extend((row + f, row + m + f) for f in range(m))
            row += 2 * m
        return cls(tuple(pairs), row)

    def partner(self) -> np.ndarray:
        part = np.full(self.n_rows, -1, dtype=np.int64)
        for a, b in self.pairs:
            for x, y in ((a, b), (b, a)):
                if not 0 <= x < self.n_rows:
                    raise UnpairedRow(f"pair row {x} outside 0..{self.n_rows - 1}")
                if part[x] != -1 or x == y:
                    raise UnpairedRow(f"row {x} appears in more than one pair")
                part[x] = y
        missing = np.flatnonzero(part < 0)
        if missing.size:
            raise UnpairedRow(f"row(s) {missing.tolist()[:5]} have no positive partner")
        return part


def view_partners(n_rows: int) -> np.ndarray:
    """Partner of each row when views (2n, 2n+1) are positives."""
    if n_rows < 2 or n_rows % 2:
        raise UnpairedRow(f"need an even number (>= 2) of view rows, got {n_rows}")
    return np.arange(n_rows) ^ 1


def _normalize(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    small = np.flatnonzero(norms < ZERO_NORM)
    if small.size:
        raise ZeroVector(f"latent row(s) {small.tolist()[:5]} have norm below {ZERO_NORM}")
    return z / norms[:, None], norms


def contrastive(z: np.ndarray, partner: np.ndarray, tau: float, w: np.ndarray | None = None,
                weight_positive: bool = True) -> tuple[float, np.ndarray]:
    """Mean anchor loss and its gradient w.r.t. ``z``.

    Args:
        z: ``(n, d)`` latent rows.
        partner: ``partner[i]`` is the positive of row i.
        tau: Temperature.
        w: ``(n, n)`` weights on the denominator terms; ``None`` means all ones.
        weight_positive: If False the partner's denominator term keeps weight 1.
    """
    n = z.shape[0]
    if w is None:
        w = np.ones((n, n), dtype=z.dtype)
    elif w.shape != (n, n):
        raise WeightShapeMismatch(f"weight matrix {w.shape} does not match {n} latent rows")
    rows = np.arange(n)
    zh, norms = _normalize(z)
    s = zh @ zh.T
    weights = np.array(w, dtype=z.dtype, copy=True)
    if not weight_positive:
        weights[rows, partner] = 1.0
    logits = weights * s / tau
    logits[rows, rows] = -np.inf
    top = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - top)
    denom = ex.sum(axis=1)
    per_anchor = -s[rows, partner] / tau + top[:, 0] + np.log(denom)
    loss = float(per_anchor.mean())

    # dL/ds: softmax over the weighted logits, minus the positive's numerator
    g = (ex / denom[:, None]) * weights / tau
    g[rows, partner] -= 1.0 / tau
    g /= n
    dzh = (g + g.T) @ zh
    dz = (dzh - zh * np.sum(zh * dzh, axis=1, keepdims=True)) / norms[:, None]
    return loss, dz


def nt_xent(z: np.ndarray, tau: float = 0.1) -> tuple[float, np.ndarray]:
    """NT-Xent with views (2n, 2n+1) as positives.

    Example:
        >>> import numpy as np
        >>> z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        >>> round(nt_xent(z, tau=1.0)[0], 4)
        0.5514
    """
    return contrastive(z, view_partners(z.shape[0]), tau)


def weighted_nt_xent(z: np.ndarray, w: NegWeightMatrix | np.ndarray, tau: float = 0.1,
                     weight_positive: bool = True) -> tuple[float, np.ndarray]:
    """NT-Xent whose denominator terms are scaled by fingerprint weights."""
    wm = w.w if isinstance(w, NegWeightMatrix) else np.asarray(w)
    return contrastive(z, view_partners(z.shape[0]), tau, wm, weight_positive)


def fragment_nt_xent(zf: np.ndarray, pairs: FragmentPairIndex, tau: float = 0.1) -> tuple[float, np.ndarray]:
    """Unweighted NT-Xent over fragment latents; every non-partner row is a negative."""
    if pairs.n_rows != zf.shape[0]:
        raise UnpairedRow(f"pair index covers {pairs.n_rows} rows, got {zf.shape[0]} fragment latents")
    return contrastive(zf, pairs.partner(), tau)


def total_loss(mol_loss: float, frag_loss: float, lambda2: float) -> float:
    """``mol_loss + lambda2 * frag_loss``; the gradients combine the same way."""
    if not (math.isfinite(mol_loss) and math.isfinite(frag_loss)):
        raise NonFinite(f"non-finite loss term (molecule {mol_loss}, fragment {frag_loss})")
    total = mol_loss + lambda2 * frag_loss
    if not math.isfinite(total):
        raise NonFinite(f"total loss overflowed: {total}")
    return total
