"""Minimal differentiable building blocks with hand-coded gradients."""

from .ops import (
    LstmParams,
    GruParams,
    IndRnnParams,
    lstm_step,
    gru_step,
    indrnn_step,
    positional_encoding,
    attention,
    attention_backward,
    query_dispersion,
    select_top_queries,
    probsparse_attention,
    probsparse_attention_backward,
    sigmoid,
    softmax,
)
from .losses import mse_loss, logcosh_loss, bce_loss
from .optim import Adam
from .model import ModelSpec, TrainedModel, train

__all__ = [
    "LstmParams",
    "GruParams",
    "IndRnnParams",
    "lstm_step",
    "gru_step",
    "indrnn_step",
    "positional_encoding",
    "attention",
    "attention_backward",
    "query_dispersion",
    "select_top_queries",
    "probsparse_attention",
    "probsparse_attention_backward",
    "sigmoid",
    "softmax",
    "mse_loss",
    "logcosh_loss",
    "bce_loss",
    "Adam",
    "ModelSpec",
    "TrainedModel",
    "train",
]
