"""Adam with decoupled weight decay and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NonFiniteGrad, ShapeMismatch


def cosine_lr(step: int, total: int, lr0: float) -> float:
    """``lr0 * 0.5 * (1 + cos(pi * step / total))``, no warmup or restarts."""
    if total <= 0 or not 0 <= step <= total:
        raise DomainError(f"need 0 <= step <= total and total > 0, got step={step}, total={total}")
    return max(0.0, lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total)))


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float | dict, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0,
              decoupled: bool = True) -> AdamState:
    """One in-place Adam update of ``params``.

    With ``decoupled`` the decay is applied as ``theta -= lr * wd * theta``
    before the moment update; otherwise ``wd * theta`` is added to the gradient.
    ``lr`` may be a dict giving a rate per parameter name.
    """
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            shape = params[name].shape if name in params else None
            raise ShapeMismatch(f"gradient {name!r} has shape {g.shape}, parameter {shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGrad(f"non-finite gradient for {name!r}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        p = params[name]
        step_lr = lr[name] if isinstance(lr, dict) else lr
        if weight_decay and decoupled:
            p -= p.dtype.type(step_lr * weight_decay) * p
        elif weight_decay:
            g = g + weight_decay * p
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        if step_lr:
            p -= (step_lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
    return state
