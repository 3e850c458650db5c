"""Stateless numeric ops: activations, recurrent cell steps, positional
encoding and (sparse) scaled dot-product attention with analytic backward
passes. Everything works in float64 on plain numpy arrays; batched inputs
stack along the leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, ShapeError

__all__ = [
    "sigmoid",
    "softmax",
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
]


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(scores, axis=-1):
    """Row-stable softmax (max subtracted before exponentiation)."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _check_dims(value, expected, what):
    if value.shape != expected:
        raise ShapeError(f"{what}: expected shape {expected}, got {value.shape}")


# ---------------------------------------------------------------------------
# recurrent cell parameters and single steps
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Gate parameters of one LSTM cell (units m over inputs n).

    w_* act on the input, u_* on the previous hidden state and b_* are
    the gate biases, for the forget, input, output and candidate paths.
    """

    w_f: np.ndarray
    w_i: np.ndarray
    w_o: np.ndarray
    w_c: np.ndarray
    u_f: np.ndarray
    u_i: np.ndarray
    u_o: np.ndarray
    u_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        m, n = self.w_f.shape
        for name in ("w_f", "w_i", "w_o", "w_c"):
            _check_dims(getattr(self, name), (m, n), name)
        for name in ("u_f", "u_i", "u_o", "u_c"):
            _check_dims(getattr(self, name), (m, m), name)
        for name in ("b_f", "b_i", "b_o", "b_c"):
            _check_dims(getattr(self, name), (m,), name)

    @property
    def units(self) -> int:
        return self.w_f.shape[0]

    @property
    def n_in(self) -> int:
        return self.w_f.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, units: int) -> "LstmParams":
        sw = 1.0 / np.sqrt(n_in)
        su = 1.0 / np.sqrt(units)
        mk_w = lambda: rng.uniform(-sw, sw, (units, n_in))
        mk_u = lambda: rng.uniform(-su, su, (units, units))
        return cls(
            w_f=mk_w(), w_i=mk_w(), w_o=mk_w(), w_c=mk_w(),
            u_f=mk_u(), u_i=mk_u(), u_o=mk_u(), u_c=mk_u(),
            b_f=np.zeros(units), b_i=np.zeros(units),
            b_o=np.zeros(units), b_c=np.zeros(units),
        )


@dataclass
class GruParams:
    """Update (z), reset (r) and candidate (h) parameters of one GRU cell."""

    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        m, n = self.w_z.shape
        for name in ("w_z", "w_r", "w_h"):
            _check_dims(getattr(self, name), (m, n), name)
        for name in ("u_z", "u_r", "u_h"):
            _check_dims(getattr(self, name), (m, m), name)
        for name in ("b_z", "b_r", "b_h"):
            _check_dims(getattr(self, name), (m,), name)

    @property
    def units(self) -> int:
        return self.w_z.shape[0]

    @property
    def n_in(self) -> int:
        return self.w_z.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, units: int) -> "GruParams":
        sw = 1.0 / np.sqrt(n_in)
        su = 1.0 / np.sqrt(units)
        mk_w = lambda: rng.uniform(-sw, sw, (units, n_in))
        mk_u = lambda: rng.uniform(-su, su, (units, units))
        return cls(
            w_z=mk_w(), w_r=mk_w(), w_h=mk_w(),
            u_z=mk_u(), u_r=mk_u(), u_h=mk_u(),
            b_z=np.zeros(units), b_r=np.zeros(units), b_h=np.zeros(units),
        )


@dataclass
class IndRnnParams:
    """Independent-neuron RNN cell: the recurrence is a Hadamard product
    with the per-neuron vector ``u``, not a matrix multiply."""

    w: np.ndarray  # (units, n_in)
    u: np.ndarray  # (units,)
    b: np.ndarray  # (units,)

    def __post_init__(self):
        m, _ = self.w.shape
        _check_dims(self.u, (m,), "u")
        _check_dims(self.b, (m,), "b")

    @property
    def units(self) -> int:
        return self.w.shape[0]

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, units: int) -> "IndRnnParams":
        sw = 1.0 / np.sqrt(n_in)
        return cls(
            w=rng.uniform(-sw, sw, (units, n_in)),
            u=rng.uniform(-1.0, 1.0, units),
            b=np.zeros(units),
        )


def _step_inputs(x_t, h_prev, n_in, units, what):
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x_t.shape[-1] != n_in:
        raise ShapeError(f"{what}: input width {x_t.shape[-1]} != cell n_in {n_in}")
    if h_prev.shape[-1] != units:
        raise ShapeError(f"{what}: state width {h_prev.shape[-1]} != cell units {units}")
    return x_t, h_prev


def lstm_step(p: LstmParams, x_t, h_prev, c_prev):
    """One LSTM step: three sigmoid gates, tanh candidate, tanh output.

    Returns (h_t, c_t). Accepts vectors or (batch, dim) arrays.
    """
    x_t, h_prev = _step_inputs(x_t, h_prev, p.n_in, p.units, "lstm_step")
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if c_prev.shape != h_prev.shape:
        raise ShapeError("lstm_step: cell state shape must match hidden state shape")
    f = sigmoid(x_t @ p.w_f.T + h_prev @ p.u_f.T + p.b_f)
    i = sigmoid(x_t @ p.w_i.T + h_prev @ p.u_i.T + p.b_i)
    o = sigmoid(x_t @ p.w_o.T + h_prev @ p.u_o.T + p.b_o)
    g = np.tanh(x_t @ p.w_c.T + h_prev @ p.u_c.T + p.b_c)
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def gru_step(p: GruParams, x_t, h_prev):
    """One GRU step; the update gate z weights the candidate state:
    h_t = z * h_hat + (1 - z) * h_prev."""
    x_t, h_prev = _step_inputs(x_t, h_prev, p.n_in, p.units, "gru_step")
    z = sigmoid(x_t @ p.w_z.T + h_prev @ p.u_z.T + p.b_z)
    r = sigmoid(x_t @ p.w_r.T + h_prev @ p.u_r.T + p.b_r)
    h_hat = np.tanh(x_t @ p.w_h.T + (r * h_prev) @ p.u_h.T + p.b_h)
    return z * h_hat + (1.0 - z) * h_prev


def indrnn_step(p: IndRnnParams, x_t, h_prev):
    """One IndRNN step: h_t = relu(W x_t + u . h_prev + b)."""
    x_t, h_prev = _step_inputs(x_t, h_prev, p.n_in, p.units, "indrnn_step")
    return np.maximum(x_t @ p.w.T + p.u * h_prev + p.b, 0.0)


# ---------------------------------------------------------------------------
# positional encoding
# ---------------------------------------------------------------------------

def positional_encoding(length: int, d_model: int, base: float | None = None) -> np.ndarray:
    """Sin/cos position table with an input-length-scaled default base.

    Column pair 2j / 2j+1 holds sin / cos of pos / base^(2j / d_model);
    ``base`` defaults to 2 * length. Pass base=10000.0 for the
    conventional table.
    """
    if length < 1 or d_model < 1:
        raise ConfigurationError("positional_encoding needs positive length and d_model")
    if base is None:
        base = 2.0 * length
    pos = np.arange(length, dtype=np.float64)[:, None]
    col = np.arange(d_model, dtype=np.float64)
    exponent = 2.0 * (col // 2) / d_model
    angles = pos / np.power(base, exponent)[None, :]
    pe = np.empty((length, d_model))
    pe[:, 0::2] = np.sin(angles[:, 0::2])
    pe[:, 1::2] = np.cos(angles[:, 1::2])
    return pe


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def _attention_shapes(Q, K, V):
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if Q.ndim != 2 or K.ndim != 2 or V.ndim != 2:
        raise ShapeError("attention expects 2-D Q, K, V")
    if Q.shape[1] != K.shape[1]:
        raise ShapeError(f"query width {Q.shape[1]} != key width {K.shape[1]}")
    if K.shape[0] != V.shape[0]:
        raise ShapeError(f"{K.shape[0]} keys for {V.shape[0]} value rows")
    return Q, K, V


def attention(Q, K, V, d_k: int | None = None) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V with stabilized row softmax."""
    Q, K, V = _attention_shapes(Q, K, V)
    d_k = d_k or Q.shape[1]
    weights = softmax(Q @ K.T / np.sqrt(d_k), axis=1)
    return weights @ V


def attention_backward(Q, K, V, d_out, d_k: int | None = None):
    """Gradients of full attention w.r.t. Q, K and V."""
    Q, K, V = _attention_shapes(Q, K, V)
    d_k = d_k or Q.shape[1]
    scale = 1.0 / np.sqrt(d_k)
    weights = softmax(Q @ K.T * scale, axis=1)
    d_out = np.asarray(d_out, dtype=np.float64)
    d_weights = d_out @ V.T
    d_scores = weights * (d_weights - np.sum(d_weights * weights, axis=1, keepdims=True))
    return (d_scores @ K * scale, d_scores.T @ Q * scale, weights.T @ d_out)


def query_dispersion(Q, K, d_k: int | None = None) -> np.ndarray:
    """Sparsity measure per query: logsumexp of its scaled scores minus
    their arithmetic mean. Uniform-attending queries score near zero."""
    Q, K, _ = _attention_shapes(Q, K, K)
    d_k = d_k or Q.shape[1]
    scores = Q @ K.T / np.sqrt(d_k)
    peak = scores.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.sum(np.exp(scores - peak), axis=1))
    return lse - scores.mean(axis=1)


def resolve_top_u(top_u, n_queries: int) -> int:
    """"auto" keeps ceil(5 ln L) queries, the customary sampling factor."""
    if top_u == "auto":
        return max(1, min(n_queries, int(np.ceil(5.0 * np.log(max(n_queries, 2))))))
    u = int(top_u)
    if u < 1 or u > n_queries:
        raise ConfigurationError(
            f"top_u must lie in [1, {n_queries}] (query count), got {u}"
        )
    return u


def select_top_queries(Q, K, top_u, d_k: int | None = None) -> np.ndarray:
    """Indices of the top-u queries by dispersion, ties to the lowest index."""
    m = query_dispersion(Q, K, d_k)
    u = resolve_top_u(top_u, m.size)
    order = np.argsort(-m, kind="stable")
    return np.sort(order[:u])


def probsparse_attention(Q, K, V, top_u="auto", d_k: int | None = None) -> np.ndarray:
    """Sparse attention: only the top-u most dispersed queries attend.

    The dispersion measure is computed exactly for every query (no key
    sampling); the remaining query rows fall back to the mean of V.
    """
    Q, K, V = _attention_shapes(Q, K, V)
    selected = select_top_queries(Q, K, top_u, d_k)
    out = np.tile(V.mean(axis=0), (Q.shape[0], 1))
    out[selected] = attention(Q[selected], K, V, d_k or Q.shape[1])
    return out


def probsparse_attention_backward(Q, K, V, d_out, top_u="auto", d_k: int | None = None):
    """Gradients of probsparse attention w.r.t. Q, K and V.

    The hard top-u selection is treated as a constant of the input, as
    usual for discrete routing.
    """
    Q, K, V = _attention_shapes(Q, K, V)
    d_out = np.asarray(d_out, dtype=np.float64)
    selected = select_top_queries(Q, K, top_u, d_k)
    mask = np.zeros(Q.shape[0], dtype=bool)
    mask[selected] = True
    dQ = np.zeros_like(Q)
    dQ_sel, dK, dV = attention_backward(Q[selected], K, V, d_out[selected], d_k or Q.shape[1])
    dQ[selected] = dQ_sel
    # unselected rows emit the mean of V; their gradient spreads evenly
    if (~mask).any():
        dV += np.tile(d_out[~mask].sum(axis=0) / V.shape[0], (V.shape[0], 1))
    return dQ, dK, dV
