"""Central finite-difference gradients, used as an oracle for BPTT."""
from __future__ import annotations

import numpy as np

from .heads import mean_cross_entropy
from .model import ModelParams, forward, zeros_like


def fd_gradient(model: ModelParams, features, labels, epsilon: float = 1e-5) -> ModelParams:
    """Perturb each parameter entry by +-epsilon and difference the mean loss."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    labels = np.atleast_1d(labels)
    work = model.copy()
    grads = zeros_like(model)

    def loss() -> float:
        return mean_cross_entropy(forward(work, features)[0], labels)

    for (_, p), (_, g) in zip(work.named_arrays(), grads.named_arrays()):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + epsilon
            up = loss()
            p[idx] = orig - epsilon
            down = loss()
            p[idx] = orig
            g[idx] = (up - down) / (2.0 * epsilon)
    return grads


def fd_scalar(fn, w: float, epsilon: float = 1e-5) -> float:
    return (fn(w + epsilon) - fn(w - epsilon)) / (2.0 * epsilon)


def max_relative_error(analytic: ModelParams, numeric: ModelParams, floor: float = 1e-6) -> float:
    """Max over entries of ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps entries whose true gradient is ~0 from dividing roundoff
    by roundoff.
    """
    worst = 0.0
    for (na, a), (nn_, n) in zip(analytic.named_arrays(), numeric.named_arrays()):
        if na != nn_:
            raise ValueError(f"gradient layouts differ: {na} vs {nn_}")
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
