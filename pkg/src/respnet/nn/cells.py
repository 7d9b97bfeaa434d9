"""GRU and LSTM cells with sequence unrolling and exact BPTT.

All arrays are float64. Sequences are time-major: ``xs`` has shape
``(T, B, D)`` and the returned states have shape ``(T, B, H)``. Single-step
functions also accept unbatched ``(D,)`` / ``(H,)`` vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    pass


class _ParamGroup:
    """Mixin giving dataclass parameter groups a named-array view."""

    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self))

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.names()}

    def copy(self):
        return type(self)(**{k: v.copy() for k, v in self.arrays().items()})


@dataclass
class GruParams(_ParamGroup):
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.U_z.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]

    def validate(self) -> None:
        _check_gate_shapes(self, "zrh")


@dataclass
class LstmParams(_ParamGroup):
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.U_i.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    def validate(self) -> None:
        _check_gate_shapes(self, "ifog")


def _check_gate_shapes(p, gates: str) -> None:
    H = getattr(p, f"U_{gates[0]}").shape[0]
    D = getattr(p, f"W_{gates[0]}").shape[1]
    for g in gates:
        for name, shape in ((f"W_{g}", (H, D)), (f"U_{g}", (H, H)), (f"b_{g}", (H,))):
            if getattr(p, name).shape != shape:
                raise ShapeError(
                    f"{name} has shape {getattr(p, name).shape}, expected {shape}"
                )


def _check_step_inputs(p, x_t, h_prev) -> None:
    if x_t.shape[-1] != p.input_dim:
        raise ShapeError(f"x_t width {x_t.shape[-1]} != input dim {p.input_dim}")
    if h_prev.shape[-1] != p.hidden_dim:
        raise ShapeError(f"h_prev width {h_prev.shape[-1]} != hidden dim {p.hidden_dim}")


# ---------------------------------------------------------------- GRU


def _gru_stacked(p: GruParams):
    W = np.concatenate([p.W_z, p.W_r, p.W_h])
    b = np.concatenate([p.b_z, p.b_r, p.b_h])
    U_zr = np.concatenate([p.U_z, p.U_r])
    return W, b, U_zr


def _gru_step(a_x, h, U_zr, U_h, H):
    zr = expit(a_x[..., : 2 * H] + h @ U_zr.T)
    z = zr[..., :H]
    r = zr[..., H:]
    rh = r * h
    cand = np.tanh(a_x[..., 2 * H :] + rh @ U_h.T)
    h_new = (1.0 - z) * h + z * cand
    return h_new, z, r, rh, cand


def gru_cell_step(params: GruParams, x_t, h_prev):
    """One GRU update. ``x_t``: (..., D); ``h_prev``: (..., H)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_step_inputs(params, x_t, h_prev)
    W, b, U_zr = _gru_stacked(params)
    return _gru_step(x_t @ W.T + b, h_prev, U_zr, params.U_h, params.hidden_dim)[0]


def gru_forward(params: GruParams, xs: np.ndarray, h0=None):
    """Unroll a GRU over ``xs`` (T, B, D). Returns states (T, B, H) and a cache."""
    T, B, _ = xs.shape
    H = params.hidden_dim
    W, b, U_zr = _gru_stacked(params)
    a_x = xs @ W.T + b
    hs = np.empty((T + 1, B, H))
    hs[0] = 0.0 if h0 is None else h0
    z = np.empty((T, B, H))
    r = np.empty((T, B, H))
    rh = np.empty((T, B, H))
    cand = np.empty((T, B, H))
    U_h = params.U_h
    for t in range(T):
        hs[t + 1], z[t], r[t], rh[t], cand[t] = _gru_step(a_x[t], hs[t], U_zr, U_h, H)
    cache = {"xs": xs, "hs": hs, "z": z, "r": r, "rh": rh, "cand": cand}
    return hs[1:], cache


def gru_backward(params: GruParams, cache: dict, dstates: np.ndarray) -> GruParams:
    """Backpropagate ``dstates`` (dL/dh_t for t=1..T) through the unrolled GRU."""
    xs, hs = cache["xs"], cache["hs"]
    z, r, rh, cand = cache["z"], cache["r"], cache["rh"], cache["cand"]
    T, B, H = dstates.shape
    _, _, U_zr = _gru_stacked(params)
    U_h = params.U_h
    da = np.empty((T, B, 3 * H))
    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dstates[t]
        h = hs[t]
        zt, rt, ct = z[t], r[t], cand[t]
        dah = dh * zt * (1.0 - ct * ct)
        drh = dah @ U_h
        da[t, :, :H] = dh * (ct - h) * zt * (1.0 - zt)
        da[t, :, H : 2 * H] = drh * h * rt * (1.0 - rt)
        da[t, :, 2 * H :] = dah
        dh = dh * (1.0 - zt) + drh * rt + da[t, :, : 2 * H] @ U_zr
    dW = np.tensordot(da, xs, axes=([0, 1], [0, 1]))
    db = da.sum(axis=(0, 1))
    dU_zr = np.tensordot(da[..., : 2 * H], hs[:-1], axes=([0, 1], [0, 1]))
    dU_h = np.tensordot(da[..., 2 * H :], rh, axes=([0, 1], [0, 1]))
    return GruParams(
        W_z=dW[:H], W_r=dW[H : 2 * H], W_h=dW[2 * H :],
        U_z=dU_zr[:H], U_r=dU_zr[H:], U_h=dU_h,
        b_z=db[:H], b_r=db[H : 2 * H], b_h=db[2 * H :],
    )


# ---------------------------------------------------------------- LSTM


def _lstm_stacked(p: LstmParams):
    W = np.concatenate([p.W_i, p.W_f, p.W_o, p.W_g])
    U = np.concatenate([p.U_i, p.U_f, p.U_o, p.U_g])
    b = np.concatenate([p.b_i, p.b_f, p.b_o, p.b_g])
    return W, U, b


def _lstm_step(a_x, h, c, U, H):
    a = a_x + h @ U.T
    ifo = expit(a[..., : 3 * H])
    g = np.tanh(a[..., 3 * H :])
    i = ifo[..., :H]
    f = ifo[..., H : 2 * H]
    o = ifo[..., 2 * H :]
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return o * tc, c_new, ifo, g, tc


def lstm_cell_step(params: LstmParams, x_t, h_prev, c_prev):
    """One LSTM update; returns ``(h_t, c_t)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    _check_step_inputs(params, x_t, h_prev)
    if c_prev.shape != h_prev.shape:
        raise ShapeError(f"c_prev shape {c_prev.shape} != h_prev shape {h_prev.shape}")
    W, U, b = _lstm_stacked(params)
    h, c, *_ = _lstm_step(x_t @ W.T + b, h_prev, c_prev, U, params.hidden_dim)
    return h, c


def lstm_forward(params: LstmParams, xs: np.ndarray, h0=None, c0=None):
    T, B, _ = xs.shape
    H = params.hidden_dim
    W, U, b = _lstm_stacked(params)
    a_x = xs @ W.T + b
    hs = np.empty((T + 1, B, H))
    cs = np.empty((T + 1, B, H))
    hs[0] = 0.0 if h0 is None else h0
    cs[0] = 0.0 if c0 is None else c0
    ifo = np.empty((T, B, 3 * H))
    g = np.empty((T, B, H))
    tc = np.empty((T, B, H))
    for t in range(T):
        hs[t + 1], cs[t + 1], ifo[t], g[t], tc[t] = _lstm_step(a_x[t], hs[t], cs[t], U, H)
    cache = {"xs": xs, "hs": hs, "cs": cs, "ifo": ifo, "g": g, "tc": tc}
    return hs[1:], cache


def lstm_backward(params: LstmParams, cache: dict, dstates: np.ndarray) -> LstmParams:
    xs, hs, cs = cache["xs"], cache["hs"], cache["cs"]
    ifo, g, tc = cache["ifo"], cache["g"], cache["tc"]
    T, B, H = dstates.shape
    _, U, _ = _lstm_stacked(params)
    da = np.empty((T, B, 4 * H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dstates[t]
        i = ifo[t, :, :H]
        f = ifo[t, :, H : 2 * H]
        o = ifo[t, :, 2 * H :]
        gt, tct = g[t], tc[t]
        dc = dc + dh * o * (1.0 - tct * tct)
        da[t, :, :H] = dc * gt * i * (1.0 - i)
        da[t, :, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
        da[t, :, 2 * H : 3 * H] = dh * tct * o * (1.0 - o)
        da[t, :, 3 * H :] = dc * i * (1.0 - gt * gt)
        dc = dc * f
        dh = da[t] @ U
    dW = np.tensordot(da, xs, axes=([0, 1], [0, 1]))
    dU = np.tensordot(da, hs[:-1], axes=([0, 1], [0, 1]))
    db = da.sum(axis=(0, 1))
    s = [slice(k * H, (k + 1) * H) for k in range(4)]
    return LstmParams(
        W_i=dW[s[0]], W_f=dW[s[1]], W_o=dW[s[2]], W_g=dW[s[3]],
        U_i=dU[s[0]], U_f=dU[s[1]], U_o=dU[s[2]], U_g=dU[s[3]],
        b_i=db[s[0]], b_f=db[s[1]], b_o=db[s[2]], b_g=db[s[3]],
    )


# ---------------------------------------------------------------- generic


CELL_FORWARD = {GruParams: gru_forward, LstmParams: lstm_forward}
CELL_BACKWARD = {GruParams: gru_backward, LstmParams: lstm_backward}


def run_direction(params, xs, reverse: bool = False):
    """Unroll a cell over ``xs`` (T, B, D), optionally right-to-left.

    Reverse states are re-aligned so ``states[t]`` is the state after reading
    ``x_t`` (coming from the end of the sequence). Returns ``(states, cache)``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 2:
        xs = xs[:, None, :]
    if xs.shape[0] == 0:
        raise ValueError("empty input sequence")
    forward = CELL_FORWARD[type(params)]
    if reverse:
        states, cache = forward(params, xs[::-1])
        return states[::-1], cache
    return forward(params, xs)


def backprop_direction(params, cache, dstates, reverse: bool = False):
    backward = CELL_BACKWARD[type(params)]
    if reverse:
        return backward(params, cache, dstates[::-1])
    return backward(params, cache, dstates)


def concat_bidirectional(fwd_states, bwd_states):
    """Per-step concatenation ``[h_fwd, h_bwd]`` along the last axis."""
    fwd_states = np.asarray(fwd_states, dtype=np.float64)
    bwd_states = np.asarray(bwd_states, dtype=np.float64)
    if len(fwd_states) != len(bwd_states):
        raise ValueError(
            f"direction lengths differ: {len(fwd_states)} vs {len(bwd_states)}"
        )
    return np.concatenate([fwd_states, bwd_states], axis=-1)
