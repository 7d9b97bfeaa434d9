"""Recurrent cells, attention pooling, the softmax head and Adam."""
from .cells import GruParams, LstmParams, ShapeError, gru_cell_step, lstm_cell_step
from .heads import AttentionParams, attention_forward, softmax
from .model import ModelDims, ModelParams, backward, forward, init_params, loss_and_grad

__all__ = [
    "AttentionParams",
    "GruParams",
    "LstmParams",
    "ModelDims",
    "ModelParams",
    "ShapeError",
    "attention_forward",
    "backward",
    "forward",
    "gru_cell_step",
    "init_params",
    "lstm_cell_step",
    "loss_and_grad",
    "softmax",
]
