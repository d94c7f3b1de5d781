"""Shared Transformer encoder, attention decoder, CTC head, and the joint loss.

Everything is batched: features are (B, T, D) with per-utterance lengths and
token inputs are right-padded.  Padding never leaks into valid positions, so
eval-mode results do not depend on batch composition.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .. import numcore as nc
from ..ctc import ctc_loss
from ..errors import ConfigError, TrainingError
from ..numcore import ModelParams, Tensor
from ..textnorm import SOS_EOS_ID
from .config import ModelConfig

IGNORE = -1
ATT_KEYS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


# ---------------------------------------------------------------- parameters


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _add_attention(p: ModelParams, prefix: str, d: int, rng) -> None:
    for w in ("q", "k", "v", "o"):
        p.add(f"{prefix}.w{w}", _glorot(rng, d, d))
        p.add(f"{prefix}.b{w}", np.zeros(d))


def _add_norm(p: ModelParams, prefix: str, d: int) -> None:
    p.add(f"{prefix}.g", np.ones(d))
    p.add(f"{prefix}.b", np.zeros(d))


def _add_ff(p: ModelParams, prefix: str, d: int, ff: int, rng) -> None:
    p.add(f"{prefix}.ff1.w", _glorot(rng, d, ff))
    p.add(f"{prefix}.ff1.b", np.zeros(ff))
    p.add(f"{prefix}.ff2.w", _glorot(rng, ff, d))
    p.add(f"{prefix}.ff2.b", np.zeros(d))


def subsample_layers(cfg: ModelConfig) -> int:
    return {1: 0, 2: 1, 4: 2}[cfg.subsample_factor]


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(seed)
    d, V = cfg.model_dim, cfg.vocab_size
    p = ModelParams()
    width = cfg.input_dim
    n_sub = subsample_layers(cfg)
    if n_sub == 0:
        p.add("sub.0.w", _glorot(rng, width, d))
        p.add("sub.0.b", np.zeros(d))
    for k in range(n_sub):
        p.add(f"sub.{k}.w", _glorot(rng, 2 * width, d))
        p.add(f"sub.{k}.b", np.zeros(d))
        width = d
    for i in range(cfg.enc_layers):
        _add_norm(p, f"enc.{i}.ln1", d)
        _add_attention(p, f"enc.{i}.att", d, rng)
        _add_norm(p, f"enc.{i}.ln2", d)
        _add_ff(p, f"enc.{i}", d, cfg.ff_dim, rng)
    _add_norm(p, "enc.ln", d)
    p.add("ctc.w", _glorot(rng, d, V))
    p.add("ctc.b", np.zeros(V))
    p.add("dec.emb", rng.normal(0.0, d**-0.5, size=(V, d)))
    for i in range(cfg.dec_layers):
        _add_norm(p, f"dec.{i}.ln1", d)
        _add_attention(p, f"dec.{i}.self", d, rng)
        _add_norm(p, f"dec.{i}.ln2", d)
        _add_attention(p, f"dec.{i}.src", d, rng)
        _add_norm(p, f"dec.{i}.ln3", d)
        _add_ff(p, f"dec.{i}", d, cfg.ff_dim, rng)
    _add_norm(p, "dec.ln", d)
    p.add("dec.out.w", _glorot(rng, d, V))
    p.add("dec.out.b", np.zeros(V))
    return p


def check_compatible(params: ModelParams, cfg: ModelConfig) -> None:
    """Raise if ``params`` does not have exactly the tensors ``cfg`` implies."""
    ref = init_params(cfg, 0)
    if ref.names() != params.names():
        raise ConfigError("parameter names do not match the model configuration")
    for name, t in ref.items():
        if params[name].shape != t.shape:
            raise ConfigError(f"parameter {name!r} has shape {params[name].shape}, expected {t.shape}")


# ---------------------------------------------------------------- helpers


def pad_batch(feats: Sequence[np.ndarray], multiple: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad a list of (T_b, D) matrices to (B, Tmax, D), Tmax a multiple of ``multiple``."""
    lengths = np.array([f.shape[0] for f in feats], dtype=np.int64)
    tmax = int(lengths.max())
    tmax = -(-tmax // multiple) * multiple
    out = np.zeros((len(feats), tmax, feats[0].shape[1]))
    for b, f in enumerate(feats):
        out[b, : f.shape[0]] = f
    return out, lengths


def _norm(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    return nc.layer_norm(x, params[prefix + ".g"], params[prefix + ".b"])


def _ff(x: Tensor, params: ModelParams, prefix: str, cfg: ModelConfig, training, rng) -> Tensor:
    hdn = nc.relu(nc.linear(x, params[prefix + ".ff1.w"], params[prefix + ".ff1.b"]))
    hdn = nc.dropout(hdn, cfg.dropout, rng, training)
    return nc.linear(hdn, params[prefix + ".ff2.w"], params[prefix + ".ff2.b"])


def _att_weights(params: ModelParams, prefix: str) -> dict[str, Tensor]:
    return {k: params[f"{prefix}.{k}"] for k in ATT_KEYS}


# ---------------------------------------------------------------- encoder


def encode(
    x: Tensor | np.ndarray,
    lengths: Sequence[int],
    params: ModelParams,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, np.ndarray]:
    """(B, T, D) features -> (B, T', d) hidden states and T' = ceil(T / subsample) per row."""
    x = nc.as_tensor(x)
    if x.ndim != 3 or x.shape[2] != cfg.input_dim:
        raise ConfigError(f"encoder expects (B, T, {cfg.input_dim}) input, got {x.shape}")
    B, T, _ = x.shape
    f = cfg.subsample_factor
    lengths = np.asarray(lengths, dtype=np.int64)
    if T % f:
        x = nc.concat([x, Tensor(np.zeros((B, f - T % f, cfg.input_dim)))], axis=1)
    n_sub = subsample_layers(cfg)
    if n_sub == 0:
        h = nc.relu(nc.linear(x, params["sub.0.w"], params["sub.0.b"]))
    else:
        h = x
        for k in range(n_sub):
            b, t, w = h.shape
            h = nc.reshape(h, (b, t // 2, 2 * w))
            h = nc.relu(nc.linear(h, params[f"sub.{k}.w"], params[f"sub.{k}.b"]))
    out_len = -(-lengths // f)
    Tp = h.shape[1]
    d = cfg.model_dim
    h = nc.add(nc.mul(h, math.sqrt(d)), nc.positional_encoding(Tp, d))
    h = nc.dropout(h, cfg.dropout, rng, training)
    key_mask = nc.padding_mask(out_len, Tp)[:, None, None, :]
    for i in range(cfg.enc_layers):
        a = nc.multi_head_attention(*(3 * [_norm(h, params, f"enc.{i}.ln1")]),
                                    _att_weights(params, f"enc.{i}.att"), key_mask, cfg.heads,
                                    cfg.dropout, rng, training)
        h = nc.add(h, nc.dropout(a, cfg.dropout, rng, training))
        m = _ff(_norm(h, params, f"enc.{i}.ln2"), params, f"enc.{i}", cfg, training, rng)
        h = nc.add(h, nc.dropout(m, cfg.dropout, rng, training))
    return _norm(h, params, "enc.ln"), out_len


def ctc_logits(h: Tensor, params: ModelParams) -> Tensor:
    return nc.linear(h, params["ctc.w"], params["ctc.b"])


# ---------------------------------------------------------------- decoder


def decoder_inputs(targets: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forcing pair: inputs ``sos + y`` and outputs ``y + eos`` (padding = ignore)."""
    U = max(len(y) for y in targets) + 1
    ys_in = np.full((len(targets), U), SOS_EOS_ID, dtype=np.int64)
    ys_out = np.full((len(targets), U), IGNORE, dtype=np.int64)
    for b, y in enumerate(targets):
        ys_in[b, 1 : len(y) + 1] = y
        ys_out[b, : len(y)] = y
        ys_out[b, len(y)] = SOS_EOS_ID
    return ys_in, ys_out


def decode_step_logits(
    h: Tensor,
    h_lengths: Sequence[int],
    ys_in: np.ndarray,
    params: ModelParams,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Decoder logits (B, U, V) for every prefix position of ``ys_in``."""
    B, U = ys_in.shape
    d = cfg.model_dim
    e = nc.embedding(params["dec.emb"], ys_in)
    y = nc.add(nc.mul(e, math.sqrt(d)), nc.positional_encoding(U, d))
    y = nc.dropout(y, cfg.dropout, rng, training)
    self_mask = nc.causal_mask(U)[None, None]
    src_mask = nc.padding_mask(np.asarray(h_lengths), h.shape[1])[:, None, None, :]
    for i in range(cfg.dec_layers):
        q = _norm(y, params, f"dec.{i}.ln1")
        a = nc.multi_head_attention(q, q, q, _att_weights(params, f"dec.{i}.self"), self_mask,
                                    cfg.heads, cfg.dropout, rng, training)
        y = nc.add(y, nc.dropout(a, cfg.dropout, rng, training))
        q = _norm(y, params, f"dec.{i}.ln2")
        a = nc.multi_head_attention(q, h, h, _att_weights(params, f"dec.{i}.src"), src_mask,
                                    cfg.heads, cfg.dropout, rng, training)
        y = nc.add(y, nc.dropout(a, cfg.dropout, rng, training))
        m = _ff(_norm(y, params, f"dec.{i}.ln3"), params, f"dec.{i}", cfg, training, rng)
        y = nc.add(y, nc.dropout(m, cfg.dropout, rng, training))
    y = _norm(y, params, "dec.ln")
    return nc.linear(y, params["dec.out.w"], params["dec.out.b"])


# ---------------------------------------------------------------- losses


def attention_loss(
    h: Tensor,
    h_lengths: Sequence[int],
    targets: Sequence[Sequence[int]],
    params: ModelParams,
    cfg: ModelConfig,
    label_smoothing: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, np.ndarray]:
    """Summed token cross-entropy over the batch, plus the per-utterance sums.

    Each utterance contributes ``-sum_u ln P(y_u | x, y_<u)`` including the
    final end-of-sentence prediction.
    """
    if any(len(y) == 0 for y in targets):
        raise TrainingError("attention loss needs a non-empty target")
    ys_in, ys_out = decoder_inputs(targets)
    logits = decode_step_logits(h, h_lengths, ys_in, params, cfg, training, rng)
    total = nc.cross_entropy(logits, ys_out, ignore_id=IGNORE, reduction="sum",
                             label_smoothing=label_smoothing)
    logp = logits.data - logits.data.max(-1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(-1, keepdims=True))
    valid = ys_out != IGNORE
    picked = np.take_along_axis(logp, np.where(valid, ys_out, 0)[..., None], -1)[..., 0]
    per_utt = -(picked * valid).sum(axis=1)
    return total, per_utt


def batch_losses(
    x: Tensor | np.ndarray,
    lengths: Sequence[int],
    targets: Sequence[Sequence[int]],
    params: ModelParams,
    cfg: ModelConfig,
    label_smoothing: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
    utt_ids: Sequence[str] | None = None,
) -> tuple[Tensor, Tensor, np.ndarray, Tensor, np.ndarray]:
    """Shared encoding, then (CTC losses (B,), attention sum, per-utt attention, CTC logits, T')."""
    h, hl = encode(x, lengths, params, cfg, training, rng)
    logits = ctc_logits(h, params)
    ctc = ctc_loss(logits, targets, hl, utt_ids=utt_ids)
    att_total, att_per = attention_loss(h, hl, targets, params, cfg, label_smoothing, training, rng)
    return ctc, att_total, att_per, logits, hl


def mtl_combine(ctc_sum: Tensor, att_sum: Tensor, lam: float, batch: int = 1) -> Tensor:
    """``lam * L_ctc + (1 - lam) * L_att`` averaged over ``batch`` utterances."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("MTL weight must lie in [0, 1]")
    total = nc.add(nc.mul(ctc_sum, lam), nc.mul(att_sum, 1.0 - lam))
    return nc.mul(total, 1.0 / batch) if batch != 1 else total


def mtl_loss(
    x: np.ndarray | Tensor,
    y: Sequence[int],
    params: ModelParams,
    cfg: ModelConfig,
    lam: float,
    label_smoothing: float = 0.0,
) -> Tensor:
    """Joint loss of one utterance: encoder shared by the CTC head and the decoder."""
    x = nc.as_tensor(x)
    xb = nc.reshape(x, (1,) + x.shape) if x.ndim == 2 else x
    ctc, att, _, _, _ = batch_losses(xb, [xb.shape[1]], [list(y)], params, cfg, label_smoothing)
    return mtl_combine(nc.sum_(ctc), att, lam)


def log_posteriors(feats: np.ndarray, params: ModelParams, cfg: ModelConfig) -> np.ndarray:
    """Eval-mode CTC log-posteriors (T', V) of one utterance."""
    h, hl = encode(feats[None], [feats.shape[0]], params, cfg)
    z = ctc_logits(h, params).data[0, : hl[0]]
    z = z - z.max(-1, keepdims=True)
    return z - np.log(np.exp(z).sum(-1, keepdims=True))
