"""The four compared classifiers: gru, lstm, bi_at_gru, bi_at_lstm.

Bidirectional-attention models concatenate forward and backward states and
pool them with additive attention; the plain baselines read out the final
forward state. Inputs are batches of shape (B, T) or (B, T, D).

Each model carries a fixed (untrained) input map ``x -> (x - shift) * scale``
applied before the first recurrent layer. The identity map is the default;
``(0.5, 20)`` spreads [0, 1] features over [-10, 10], which matters a lot
for how fast the unidirectional baselines learn over 600 steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import (
    GruParams,
    LstmParams,
    ShapeError,
    backprop_direction,
    concat_bidirectional,
    run_direction,
)
from .heads import (
    AttentionParams,
    attention_backward,
    attention_forward,
    mean_cross_entropy,
    output_forward,
)

ARCHITECTURES = ("gru", "lstm", "bi_at_gru", "bi_at_lstm")
N_CLASSES = 6


@dataclass(frozen=True)
class ModelDims:
    input_dim: int = 1
    hidden: int = 32
    attention: int = 8
    classes: int = N_CLASSES

    def validate(self) -> None:
        if self.input_dim < 1 or self.hidden < 1 or self.attention < 1:
            raise ValueError(f"invalid model dims {self}")
        if self.classes != N_CLASSES:
            raise ValueError(f"classifier must have {N_CLASSES} classes, got {self.classes}")


def cell_type(arch: str):
    return LstmParams if arch.endswith("lstm") else GruParams


def is_bidirectional(arch: str) -> bool:
    return arch.startswith("bi_at_")


def normalize_arch(name: str) -> str:
    arch = name.strip().lower().replace("-", "_")
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {name!r}; choose from {ARCHITECTURES}")
    return arch


@dataclass
class ModelParams:
    arch: str
    dims: ModelDims
    fwd: GruParams | LstmParams
    W_o: np.ndarray
    b_o: np.ndarray
    bwd: GruParams | LstmParams | None = None
    att: AttentionParams | None = None
    input_shift: float = 0.0
    input_scale: float = 1.0

    def __post_init__(self):
        bi = is_bidirectional(self.arch)
        if bi != (self.bwd is not None) or bi != (self.att is not None):
            raise ValueError(f"components do not match architecture {self.arch!r}")

    @property
    def state_width(self) -> int:
        return 2 * self.dims.hidden if is_bidirectional(self.arch) else self.dims.hidden

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """All trainable arrays in declared (checkpoint) order."""
        out = []
        for prefix, group in (("fwd", self.fwd), ("bwd", self.bwd), ("att", self.att)):
            if group is not None:
                out += [(f"{prefix}.{k}", v) for k, v in group.arrays().items()]
        out += [("out.W_o", self.W_o), ("out.b_o", self.b_o)]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            arch=self.arch,
            dims=self.dims,
            fwd=self.fwd.copy(),
            W_o=self.W_o.copy(),
            b_o=self.b_o.copy(),
            bwd=None if self.bwd is None else self.bwd.copy(),
            att=None if self.att is None else self.att.copy(),
            input_shift=self.input_shift,
            input_scale=self.input_scale,
        )

    def n_params(self) -> int:
        return sum(a.size for _, a in self.named_arrays())


# Gradients share the container type.
Gradients = ModelParams


def _glorot(rng, shape):
    fan_out = shape[0] if len(shape) == 2 else 1
    fan_in = shape[1] if len(shape) == 2 else shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def glorot_bound(shape) -> float:
    fan_out = shape[0] if len(shape) == 2 else 1
    fan_in = shape[1] if len(shape) == 2 else shape[0]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def _init_cell(kind, D, H, rng, carry_bias):
    kw = {}
    for name in kind.__dataclass_fields__:
        if name.startswith("W_"):
            kw[name] = _glorot(rng, (H, D))
        elif name.startswith("U_"):
            kw[name] = _glorot(rng, (H, H))
        else:
            kw[name] = np.zeros(H)
    # GRU keeps state when the update gate is near 0, LSTM when forget is near 1
    if kind is GruParams:
        kw["b_z"][:] = -carry_bias
    else:
        kw["b_f"][:] = carry_bias
    return kind(**kw)


def init_params(
    arch: str,
    dims: ModelDims,
    rng: np.random.Generator,
    *,
    carry_bias: float = 0.0,
    input_shift: float = 0.0,
    input_scale: float = 1.0,
) -> ModelParams:
    """Glorot-uniform weights and zero biases.

    ``carry_bias > 0`` starts the recurrent cells biased toward keeping their
    state (GRU update-gate bias ``-carry_bias``, LSTM forget-gate bias
    ``+carry_bias``).
    """
    arch = normalize_arch(arch)
    dims.validate()
    kind = cell_type(arch)
    D, H, A, C = dims.input_dim, dims.hidden, dims.attention, dims.classes
    fwd = _init_cell(kind, D, H, rng, carry_bias)
    bwd = att = None
    K = H
    if is_bidirectional(arch):
        bwd = _init_cell(kind, D, H, rng, carry_bias)
        K = 2 * H
        att = AttentionParams(W_a=_glorot(rng, (A, K)), b_a=np.zeros(A), V_a=_glorot(rng, (A,)))
    return ModelParams(
        arch=arch, dims=dims, fwd=fwd, bwd=bwd, att=att,
        W_o=_glorot(rng, (C, K)), b_o=np.zeros(C),
        input_shift=float(input_shift), input_scale=float(input_scale),
    )


def zeros_like(model: ModelParams) -> ModelParams:
    out = model.copy()
    for _, a in out.named_arrays():
        a[...] = 0.0
    return out


def _as_time_major(features, D) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim == 2:
        x = x[..., None]
    if x.ndim != 3 or x.shape[2] != D:
        raise ShapeError(f"features of shape {np.shape(features)} do not fit input dim {D}")
    if x.shape[1] < 1:
        raise ValueError("sequence length must be >= 1")
    return np.ascontiguousarray(x.transpose(1, 0, 2))


def forward(model: ModelParams, features):
    """Class probabilities (B, 6) and the cache needed by :func:`backward`."""
    xs = _as_time_major(features, model.dims.input_dim)
    if model.input_shift != 0.0 or model.input_scale != 1.0:
        xs = (xs - model.input_shift) * model.input_scale
    fwd_states, fwd_cache = run_direction(model.fwd, xs)
    cache = {"arch": model.arch, "T": xs.shape[0], "fwd": fwd_cache}
    if is_bidirectional(model.arch):
        bwd_states, cache["bwd"] = run_direction(model.bwd, xs, reverse=True)
        states = concat_bidirectional(fwd_states, bwd_states)
        S, alphas, cache["att"] = attention_forward(model.att, states)
        cache["alphas"] = alphas
    else:
        S = fwd_states[-1]
    cache["S"] = S
    probs = output_forward(model.W_o, model.b_o, S)
    cache["probs"] = probs
    return probs, cache


def backward(model: ModelParams, cache: dict, labels) -> ModelParams:
    """Exact gradients of the batch-mean cross-entropy w.r.t. every parameter."""
    if cache.get("arch") != model.arch:
        raise ValueError(f"cache from {cache.get('arch')!r} used with {model.arch!r} model")
    probs, S = cache["probs"], cache["S"]
    labels = np.atleast_1d(np.asarray(labels))
    B = probs.shape[0]
    if labels.shape != (B,):
        raise ValueError(f"{labels.shape[0]} labels for a batch of {B}")
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    dW_o = dlogits.T @ S
    db_o = dlogits.sum(axis=0)
    dS = dlogits @ model.W_o
    T, H = cache["T"], model.dims.hidden
    if is_bidirectional(model.arch):
        datt, dstates = attention_backward(model.att, cache["att"], dS)
        dfwd = backprop_direction(model.fwd, cache["fwd"], dstates[..., :H])
        dbwd = backprop_direction(model.bwd, cache["bwd"], dstates[..., H:], reverse=True)
        return ModelParams(
            model.arch, model.dims, dfwd, dW_o, db_o, bwd=dbwd, att=datt,
            input_shift=model.input_shift, input_scale=model.input_scale,
        )
    dstates = np.zeros((T, B, H))
    dstates[-1] = dS
    dfwd = backprop_direction(model.fwd, cache["fwd"], dstates)
    return ModelParams(
        model.arch, model.dims, dfwd, dW_o, db_o,
        input_shift=model.input_shift, input_scale=model.input_scale,
    )


def loss_and_grad(model: ModelParams, features, labels):
    probs, cache = forward(model, features)
    loss = mean_cross_entropy(probs, np.atleast_1d(labels))
    return loss, backward(model, cache, labels), probs


def predict_proba(model: ModelParams, features, batch_size: int = 256) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    out = [forward(model, x[i : i + batch_size])[0] for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def predict(model: ModelParams, features, batch_size: int = 256) -> np.ndarray:
    """Argmax class; ties go to the lowest index."""
    return np.argmax(predict_proba(model, features, batch_size), axis=1)


def attention_weights(model: ModelParams, features, batch_size: int = 256) -> np.ndarray:
    """Per-timestep attention weights (B, T) of a bidirectional model."""
    if not is_bidirectional(model.arch):
        raise ValueError(f"{model.arch} has no attention layer")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    out = [forward(model, x[i : i + batch_size])[1]["alphas"] for i in range(0, len(x), batch_size)]
    return np.concatenate(out)
