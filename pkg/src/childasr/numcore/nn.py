"""Layer primitives built from tape ops."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError
from . import tensor as T
from .tensor import Tensor


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as (in, out)."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    y = T.matmul(x, weight)
    return y if bias is None else T.add(y, bias)


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position table of shape (length, dim)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-math.log(10000.0) / dim))
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(pos * div)
    pe[:, 1::2] = np.cos(pos * div[: dim // 2])
    return pe


def causal_mask(length: int) -> np.ndarray:
    """Boolean (length, length) mask, True above the diagonal (future positions)."""
    return np.triu(np.ones((length, length), dtype=bool), k=1)


def padding_mask(lengths, max_len: int) -> np.ndarray:
    """Boolean (B, max_len) mask, True at padded positions."""
    lengths = np.asarray(lengths)
    return np.arange(max_len)[None, :] >= lengths[:, None]


def multi_head_attention(
    query: Tensor,
    key: Tensor,
    value: Tensor,
    weights: dict[str, Tensor],
    mask: np.ndarray | None,
    heads: int,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Tensor:
    """Scaled dot-product attention over ``heads`` heads.

    ``query`` is (B, Tq, d), ``key``/``value`` are (B, Tk, d); 2-D inputs are
    treated as a batch of one.  ``weights`` holds ``wq, bq, wk, bk, wv, bv,
    wo, bo``.  ``mask`` is boolean, broadcastable to (B, heads, Tq, Tk), True
    meaning "may not attend"; those logits become -inf before the softmax.
    """
    squeeze = query.ndim == 2
    if squeeze:
        query, key, value = (T.reshape(t, (1,) + t.shape) for t in (query, key, value))
    B, Tq, d = query.shape
    Tk = key.shape[1]
    if d % heads:
        raise DimensionError(f"model width {d} not divisible by {heads} heads")
    if key.shape[-1] != d or value.shape[-1] != d or value.shape[1] != Tk:
        raise DimensionError("attention key/value shapes disagree with query")
    dk = d // heads

    def split(x: Tensor, n: int) -> Tensor:
        return T.transpose(T.reshape(x, (B, n, heads, dk)), (0, 2, 1, 3))

    q = split(linear(query, weights["wq"], weights["bq"]), Tq)
    k = split(linear(key, weights["wk"], weights["bk"]), Tk)
    v = split(linear(value, weights["wv"], weights["bv"]), Tk)
    scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dk))
    if mask is not None:
        scores = T.masked_fill(scores, mask, -np.inf)
    attn = T.softmax(scores, axis=-1)
    attn = T.dropout(attn, dropout_rate, rng, training)
    ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (B, Tq, d))
    out = linear(ctx, weights["wo"], weights["bo"])
    if squeeze:
        out = T.reshape(out, (Tq, d))
    return out


def lstm_step(
    x: Tensor, h: Tensor, c: Tensor, w_ih: Tensor, w_hh: Tensor, bias: Tensor
) -> tuple[Tensor, Tensor]:
    """One LSTM cell update; gate order in the fused weight is (input, forget, cell, output)."""
    H = h.shape[-1]
    if w_ih.shape[1] != 4 * H or w_hh.shape != (H, 4 * H):
        raise DimensionError("lstm weights must have 4*hidden output columns")
    gates = T.add(T.add(T.matmul(x, w_ih), T.matmul(h, w_hh)), bias)
    i = T.sigmoid(gates[..., 0:H])
    f = T.sigmoid(gates[..., H : 2 * H])
    g = T.tanh(gates[..., 2 * H : 3 * H])
    o = T.sigmoid(gates[..., 3 * H : 4 * H])
    c_new = T.add(T.mul(f, c), T.mul(i, g))
    h_new = T.mul(o, T.tanh(c_new))
    return h_new, c_new


# re-exported so model code can import every primitive from one place
relu = T.relu
layer_norm = T.layer_norm
dropout = T.dropout
embedding_lookup = T.embedding
