"""Additive attention pooling, softmax output layer and cross-entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import ShapeError, _ParamGroup

PROB_FLOOR = 1e-12


@dataclass
class AttentionParams(_ParamGroup):
    W_a: np.ndarray  # (A, K)
    b_a: np.ndarray  # (A,)
    V_a: np.ndarray  # (A,)

    def validate(self) -> None:
        A, _ = self.W_a.shape
        if self.b_a.shape != (A,) or self.V_a.shape != (A,):
            raise ShapeError(
                f"attention shapes inconsistent: W_a {self.W_a.shape}, "
                f"b_a {self.b_a.shape}, V_a {self.V_a.shape}"
            )


def softmax(logits, axis=-1):
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(params: AttentionParams, states):
    """Pool ``states`` (T, B, K) or (T, K) over time.

    Returns ``(S, alphas, cache)`` with ``S`` of shape (B, K) / (K,) and
    ``alphas`` of shape (B, T) / (T,).
    """
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] == 0:
        raise ValueError("attention over an empty sequence")
    if states.shape[-1] != params.W_a.shape[1]:
        raise ShapeError(
            f"state width {states.shape[-1]} != attention input {params.W_a.shape[1]}"
        )
    u = np.tanh(states @ params.W_a.T + params.b_a)
    scores = u @ params.V_a
    alphas = softmax(scores, axis=0)
    S = np.einsum("t...,t...k->...k", alphas, states)
    cache = {"states": states, "u": u, "alphas": alphas}
    return S, np.moveaxis(alphas, 0, -1), cache


def attention_backward(params: AttentionParams, cache: dict, dS):
    """Returns ``(grads, dstates)`` for batched caches (T, B, K)."""
    states, u, alphas = cache["states"], cache["u"], cache["alphas"]
    dalpha = np.einsum("bk,tbk->tb", dS, states)
    dstates = alphas[..., None] * dS[None]
    dscores = alphas * (dalpha - (alphas * dalpha).sum(axis=0, keepdims=True))
    dV = np.tensordot(dscores, u, axes=([0, 1], [0, 1]))
    dpre = dscores[..., None] * params.V_a * (1.0 - u * u)
    dW = np.tensordot(dpre, states, axes=([0, 1], [0, 1]))
    db = dpre.sum(axis=(0, 1))
    dstates += dpre @ params.W_a
    return AttentionParams(W_a=dW, b_a=db, V_a=dV), dstates


def output_forward(W_o, b_o, S):
    """Class probabilities from the pooled representation ``S``."""
    W_o = np.asarray(W_o, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S.shape[-1] != W_o.shape[1] or np.shape(b_o) != (W_o.shape[0],):
        raise ShapeError(
            f"output layer W_o {W_o.shape}, b_o {np.shape(b_o)} vs input width {S.shape[-1]}"
        )
    return softmax(S @ W_o.T + b_o)


def cross_entropy(probs, label, n_classes: int | None = None) -> float:
    """Negative log-likelihood of ``label`` under ``probs``, floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.shape[-1] if n_classes is None else n_classes
    if not 0 <= int(label) < n:
        raise ValueError(f"label {label} out of range 0..{n - 1}")
    return float(-np.log(max(probs[int(label)], PROB_FLOOR)))


def mean_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Batch mean of :func:`cross_entropy` for ``probs`` (B, C)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError(f"labels out of range 0..{probs.shape[1] - 1}")
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))
