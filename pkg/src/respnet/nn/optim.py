"""Adam with bias correction, and global-norm gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_model(cls, model: ModelParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in model.named_arrays()},
            v={k: np.zeros_like(a) for k, a in model.named_arrays()},
        )


def global_norm(grads: ModelParams) -> float:
    return float(np.sqrt(sum(np.sum(g * g) for _, g in grads.named_arrays())))


def clip_grad_norm(grads: ModelParams, max_norm: float | None) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for _, g in grads.named_arrays():
            g *= scale
    return norm


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """One in-place Adam update of ``params``; returns ``(params, state)``."""
    pairs = list(zip(params.named_arrays(), grads.named_arrays()))
    for (name, p), (gname, g) in pairs:
        if name != gname or p.shape != g.shape:
            raise ValueError(f"gradient {gname} {g.shape} does not match parameter {name} {p.shape}")
        if name not in state.m:
            raise ValueError(f"optimizer state has no slot for {name}")
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for (name, p), (_, g) in pairs:
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state
