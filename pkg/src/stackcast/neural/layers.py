"""Trainable layers with hand-coded backward passes.

Shapes are batch-first: dense layers take (B, n_in), sequence layers
(B, T, n_in) and return the full hidden sequence (B, T, units). Each
layer exposes ``params``/``grads`` dicts keyed by tensor name; backward
accumulates into ``grads`` and returns the gradient w.r.t. its input.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from .ops import (
    GruParams,
    IndRnnParams,
    LstmParams,
    positional_encoding,
    probsparse_attention,
    probsparse_attention_backward,
    sigmoid,
    softmax,
)

__all__ = ["Dense", "LSTM", "GRU", "IndRNN", "AttentionEncoder"]


def _act(name, z):
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    raise ConfigurationError(f"unknown activation '{name}'")


def _act_grad(name, z, out):
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "tanh":
        return 1.0 - out * out
    raise ConfigurationError(f"unknown activation '{name}'")


class Dense:
    def __init__(self, n_in: int, n_out: int, activation: str = "identity"):
        self.n_in, self.n_out, self.activation = n_in, n_out, activation
        _act(activation, np.zeros(1))  # validate the name early
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def init(self, rng: np.random.Generator):
        s = 1.0 / np.sqrt(self.n_in)
        self.params = {
            "w": rng.uniform(-s, s, (self.n_out, self.n_in)),
            "b": np.zeros(self.n_out),
        }
        self.zero_grads()
        return self

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense: input width {x.shape[-1]} != {self.n_in}")
        self._x = x
        self._z = x @ self.params["w"].T + self.params["b"]
        self._out = _act(self.activation, self._z)
        return self._out

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        dz = d_out * _act_grad(self.activation, self._z, self._out)
        self.grads["w"] += dz.T @ self._x
        self.grads["b"] += dz.sum(axis=0)
        return dz @ self.params["w"]


class _Recurrent:
    """Shared plumbing for the three recurrent layers."""

    cell_cls = None

    def __init__(self, n_in: int, units: int):
        self.n_in, self.units = n_in, units
        self.cell = None
        self.grads: dict[str, np.ndarray] = {}

    def init(self, rng: np.random.Generator):
        self.cell = self.cell_cls.init(rng, self.n_in, self.units)
        self.zero_grads()
        return self

    @property
    def params(self) -> dict[str, np.ndarray]:
        return dict(vars(self.cell))

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def _check_input(self, x):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeError(
                f"recurrent layer expects (batch, time, {self.n_in}), got {x.shape}"
            )


class LSTM(_Recurrent):
    cell_cls = LstmParams

    def forward(self, x: np.ndarray, h0=None, c0=None) -> np.ndarray:
        self._check_input(x)
        p = self.cell
        B, T, _ = x.shape
        h = np.zeros((B, self.units)) if h0 is None else np.asarray(h0, float)
        c = np.zeros((B, self.units)) if c0 is None else np.asarray(c0, float)
        self._cache = []
        out = np.empty((B, T, self.units))
        for t in range(T):
            x_t = x[:, t, :]
            f = sigmoid(x_t @ p.w_f.T + h @ p.u_f.T + p.b_f)
            i = sigmoid(x_t @ p.w_i.T + h @ p.u_i.T + p.b_i)
            o = sigmoid(x_t @ p.w_o.T + h @ p.u_o.T + p.b_o)
            g = np.tanh(x_t @ p.w_c.T + h @ p.u_c.T + p.b_c)
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            self._cache.append((x_t, h, c, f, i, o, g, tanh_c))
            h, c = h_new, c_new
            out[:, t, :] = h
        return out

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        p, g_ = self.cell, self.grads
        B, T, _ = d_out.shape
        dx = np.empty((B, T, self.n_in))
        dh_next = np.zeros((B, self.units))
        dc_next = np.zeros((B, self.units))
        for t in range(T - 1, -1, -1):
            x_t, h_prev, c_prev, f, i, o, g, tanh_c = self._cache[t]
            dh = d_out[:, t, :] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
            df = dc * c_prev
            di = dc * g
            dg = dc * i
            da_f = df * f * (1.0 - f)
            da_i = di * i * (1.0 - i)
            da_o = do * o * (1.0 - o)
            da_c = dg * (1.0 - g * g)
            g_["w_f"] += da_f.T @ x_t
            g_["w_i"] += da_i.T @ x_t
            g_["w_o"] += da_o.T @ x_t
            g_["w_c"] += da_c.T @ x_t
            g_["u_f"] += da_f.T @ h_prev
            g_["u_i"] += da_i.T @ h_prev
            g_["u_o"] += da_o.T @ h_prev
            g_["u_c"] += da_c.T @ h_prev
            g_["b_f"] += da_f.sum(axis=0)
            g_["b_i"] += da_i.sum(axis=0)
            g_["b_o"] += da_o.sum(axis=0)
            g_["b_c"] += da_c.sum(axis=0)
            dx[:, t, :] = da_f @ p.w_f + da_i @ p.w_i + da_o @ p.w_o + da_c @ p.w_c
            dh_next = da_f @ p.u_f + da_i @ p.u_i + da_o @ p.u_o + da_c @ p.u_c
            dc_next = dc * f
        self.d_h0_, self.d_c0_ = dh_next, dc_next
        return dx


class GRU(_Recurrent):
    cell_cls = GruParams

    def forward(self, x: np.ndarray, h0=None) -> np.ndarray:
        self._check_input(x)
        p = self.cell
        B, T, _ = x.shape
        h = np.zeros((B, self.units)) if h0 is None else np.asarray(h0, float)
        self._cache = []
        out = np.empty((B, T, self.units))
        for t in range(T):
            x_t = x[:, t, :]
            z = sigmoid(x_t @ p.w_z.T + h @ p.u_z.T + p.b_z)
            r = sigmoid(x_t @ p.w_r.T + h @ p.u_r.T + p.b_r)
            h_hat = np.tanh(x_t @ p.w_h.T + (r * h) @ p.u_h.T + p.b_h)
            h_new = z * h_hat + (1.0 - z) * h
            self._cache.append((x_t, h, z, r, h_hat))
            h = h_new
            out[:, t, :] = h
        return out

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        p, g_ = self.cell, self.grads
        B, T, _ = d_out.shape
        dx = np.empty((B, T, self.n_in))
        dh_next = np.zeros((B, self.units))
        for t in range(T - 1, -1, -1):
            x_t, h_prev, z, r, h_hat = self._cache[t]
            dh = d_out[:, t, :] + dh_next
            dz = dh * (h_hat - h_prev)
            dhh = dh * z
            da_z = dz * z * (1.0 - z)
            da_h = dhh * (1.0 - h_hat * h_hat)
            through_uh = da_h @ p.u_h
            dr = through_uh * h_prev
            da_r = dr * r * (1.0 - r)
            g_["w_z"] += da_z.T @ x_t
            g_["w_r"] += da_r.T @ x_t
            g_["w_h"] += da_h.T @ x_t
            g_["u_z"] += da_z.T @ h_prev
            g_["u_r"] += da_r.T @ h_prev
            g_["u_h"] += da_h.T @ (r * h_prev)
            g_["b_z"] += da_z.sum(axis=0)
            g_["b_r"] += da_r.sum(axis=0)
            g_["b_h"] += da_h.sum(axis=0)
            dx[:, t, :] = da_z @ p.w_z + da_r @ p.w_r + da_h @ p.w_h
            dh_next = dh * (1.0 - z) + da_z @ p.u_z + da_r @ p.u_r + through_uh * r
        self.d_h0_ = dh_next
        return dx


class IndRNN(_Recurrent):
    cell_cls = IndRnnParams

    def forward(self, x: np.ndarray, h0=None) -> np.ndarray:
        self._check_input(x)
        p = self.cell
        B, T, _ = x.shape
        h = np.zeros((B, self.units)) if h0 is None else np.asarray(h0, float)
        self._cache = []
        out = np.empty((B, T, self.units))
        for t in range(T):
            x_t = x[:, t, :]
            a = x_t @ p.w.T + p.u * h + p.b
            h_new = np.maximum(a, 0.0)
            self._cache.append((x_t, h, a))
            h = h_new
            out[:, t, :] = h
        return out

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        p, g_ = self.cell, self.grads
        B, T, _ = d_out.shape
        dx = np.empty((B, T, self.n_in))
        dh_next = np.zeros((B, self.units))
        for t in range(T - 1, -1, -1):
            x_t, h_prev, a = self._cache[t]
            dh = d_out[:, t, :] + dh_next
            da = dh * (a > 0.0)
            g_["w"] += da.T @ x_t
            g_["u"] += (da * h_prev).sum(axis=0)
            g_["b"] += da.sum(axis=0)
            dx[:, t, :] = da @ p.w
            dh_next = da * p.u
        self.d_h0_ = dh_next
        return dx


class AttentionEncoder:
    """Single self-attention block: input projection, additive positional
    encoding, one scaled dot-product attention (optionally probsparse)."""

    def __init__(self, n_in, d_model, probsparse=False, top_u="auto", pe_base=None):
        self.n_in, self.d_model = n_in, d_model
        self.probsparse = probsparse
        self.top_u = top_u
        self.pe_base = pe_base
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def init(self, rng: np.random.Generator):
        s_in = 1.0 / np.sqrt(self.n_in)
        s_d = 1.0 / np.sqrt(self.d_model)
        self.params = {
            "w_in": rng.uniform(-s_in, s_in, (self.d_model, self.n_in)),
            "b_in": np.zeros(self.d_model),
            "w_q": rng.uniform(-s_d, s_d, (self.d_model, self.d_model)),
            "w_k": rng.uniform(-s_d, s_d, (self.d_model, self.d_model)),
            "w_v": rng.uniform(-s_d, s_d, (self.d_model, self.d_model)),
        }
        self.zero_grads()
        return self

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeError(
                f"encoder expects (batch, time, {self.n_in}), got {x.shape}"
            )
        p = self.params
        B, T, _ = x.shape
        z = x @ p["w_in"].T + p["b_in"] + positional_encoding(T, self.d_model, self.pe_base)
        q = z @ p["w_q"].T
        k = z @ p["w_k"].T
        v = z @ p["w_v"].T
        if self.probsparse:
            out = np.empty_like(v)
            for b in range(B):
                out[b] = probsparse_attention(q[b], k[b], v[b], self.top_u, self.d_model)
            weights = None
        else:
            scores = np.einsum("btd,bsd->bts", q, k) / np.sqrt(self.d_model)
            weights = softmax(scores, axis=-1)
            out = np.einsum("bts,bsd->btd", weights, v)
        self._cache = (x, z, q, k, v, weights)
        return out

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        x, z, q, k, v, weights = self._cache
        p, g_ = self.params, self.grads
        if self.probsparse:
            dq = np.empty_like(q)
            dk = np.empty_like(k)
            dv = np.empty_like(v)
            for b in range(x.shape[0]):
                dq[b], dk[b], dv[b] = probsparse_attention_backward(
                    q[b], k[b], v[b], d_out[b], self.top_u, self.d_model
                )
        else:
            dv = np.einsum("bts,btd->bsd", weights, d_out)
            dw = np.einsum("btd,bsd->bts", d_out, v)
            ds = weights * (dw - np.sum(dw * weights, axis=-1, keepdims=True))
            ds /= np.sqrt(self.d_model)
            dq = np.einsum("bts,bsd->btd", ds, k)
            dk = np.einsum("bts,btd->bsd", ds, q)
        g_["w_q"] += np.einsum("btd,bte->de", dq, z)
        g_["w_k"] += np.einsum("btd,bte->de", dk, z)
        g_["w_v"] += np.einsum("btd,bte->de", dv, z)
        dz = dq @ p["w_q"] + dk @ p["w_k"] + dv @ p["w_v"]
        g_["w_in"] += np.einsum("btd,btf->df", dz, x)
        g_["b_in"] += dz.sum(axis=(0, 1))
        return dz @ p["w_in"]
