"""Character LSTM language model trained with the tape autodiff."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import numcore as nc
from ..errors import TrainingError
from ..numcore import Adam, ModelParams, Tape, Tensor
from ..textnorm import SOS_EOS_ID, UNK_ID, Vocabulary
from .ngram import perplexity

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RnnLmConfig:
    embed_dim: int = 32
    hidden: int = 32
    layers: int = 2
    epochs: int = 10
    lr: float = 5e-3
    batch_size: int = 32
    seed: int = 0
    grad_clip: float = 5.0

    @classmethod
    def preset(cls, name: str, **kw) -> "RnnLmConfig":
        if name == "paper":
            return cls(embed_dim=512, hidden=512, layers=2, **kw)
        return cls(**kw)


def init_rnnlm_params(vocab_size: int, cfg: RnnLmConfig) -> ModelParams:
    rng = np.random.default_rng(cfg.seed)
    p = ModelParams()
    p.add("emb", rng.normal(0.0, 0.1, size=(vocab_size, cfg.embed_dim)))
    width = cfg.embed_dim
    H = cfg.hidden
    for layer in range(cfg.layers):
        s = 1.0 / math.sqrt(H)
        p.add(f"lstm.{layer}.w_ih", rng.uniform(-s, s, size=(width, 4 * H)))
        p.add(f"lstm.{layer}.w_hh", rng.uniform(-s, s, size=(H, 4 * H)))
        bias = np.zeros(4 * H)
        bias[H : 2 * H] = 1.0  # forget-gate bias
        p.add(f"lstm.{layer}.b", bias)
        width = H
    p.add("out.w", rng.uniform(-0.1, 0.1, size=(H, vocab_size)))
    p.add("out.b", np.zeros(vocab_size))
    return p


@dataclass
class RnnLm:
    params: ModelParams
    vocab: Vocabulary
    cfg: RnnLmConfig
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def ids(self, sentence: Sequence[str]) -> list[int]:
        return [self.vocab.id(w) if w != "<unk>" else UNK_ID for w in sentence]

    def _logits(self, inputs: np.ndarray, training: bool = False) -> list[Tensor]:
        """Per-step (B, V) logits for (B, U) input ids."""
        B, U = inputs.shape
        H = self.cfg.hidden
        p = self.params
        h = [Tensor(np.zeros((B, H))) for _ in range(self.cfg.layers)]
        c = [Tensor(np.zeros((B, H))) for _ in range(self.cfg.layers)]
        emb = nc.embedding(p["emb"], inputs)
        out = []
        for u in range(U):
            x = emb[:, u, :]
            for layer in range(self.cfg.layers):
                h[layer], c[layer] = nc.lstm_step(x, h[layer], c[layer], p[f"lstm.{layer}.w_ih"],
                                                  p[f"lstm.{layer}.w_hh"], p[f"lstm.{layer}.b"])
                x = h[layer]
            out.append(nc.linear(x, p["out.w"], p["out.b"]))
        return out

    def step_logprobs(self, prefix_ids: Sequence[int]) -> np.ndarray:
        """Natural-log next-token distribution after ``sos + prefix``."""
        inputs = np.array([[SOS_EOS_ID] + list(prefix_ids)], dtype=np.int64)
        z = self._logits(inputs)[-1].data[0]
        z = z - z.max()
        return z - np.log(np.exp(z).sum())

    def token_logprobs_ids(self, ids: Sequence[int]) -> np.ndarray:
        inputs = np.array([[SOS_EOS_ID] + list(ids)], dtype=np.int64)
        targets = list(ids) + [SOS_EOS_ID]
        out = []
        for u, z in enumerate(self._logits(inputs)):
            z = z.data[0] - z.data[0].max()
            lp = z - np.log(np.exp(z).sum())
            out.append(lp[targets[u]])
        return np.array(out)

    def token_logprobs(self, sentence: Sequence[str]) -> np.ndarray:
        return self.token_logprobs_ids(self.ids(sentence))

    def sentence_logprob(self, sentence: Sequence[str]) -> float:
        return float(self.token_logprobs(sentence).sum())


def _batch_loss(lm: RnnLm, seqs: list[list[int]]) -> Tensor:
    U = max(len(s) for s in seqs) + 1
    inputs = np.full((len(seqs), U), SOS_EOS_ID, dtype=np.int64)
    targets = np.full((len(seqs), U), -1, dtype=np.int64)
    for b, s in enumerate(seqs):
        inputs[b, 1 : len(s) + 1] = s
        targets[b, : len(s)] = s
        targets[b, len(s)] = SOS_EOS_ID
    steps = lm._logits(inputs, training=True)
    V = steps[0].shape[-1]
    logits = nc.concat([nc.reshape(z, (len(seqs), 1, V)) for z in steps], axis=1)
    return nc.cross_entropy(logits, targets, ignore_id=-1)


def train_rnnlm(sentences: Sequence[Sequence[str]], vocab: Vocabulary, cfg: RnnLmConfig,
                dev: Sequence[Sequence[str]] | None = None) -> RnnLm:
    """Next-token cross-entropy training; ``history`` holds (epoch, train loss, dev perplexity)."""
    if not sentences:
        raise TrainingError("cannot train an RNN LM on an empty corpus")
    lm = RnnLm(init_rnnlm_params(len(vocab), cfg), vocab, cfg)
    data = [lm.ids(s) for s in sentences]
    opt = Adam(lm.params, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 1])
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            seqs = [data[j] for j in order[i : i + cfg.batch_size]]
            lm.params.zero_grad()
            with Tape() as tape:
                loss = _batch_loss(lm, seqs)
            if not np.isfinite(loss.item()):
                raise TrainingError(f"non-finite RNN LM loss at epoch {epoch}")
            tape.backward(loss)
            for _, t in lm.params.items():
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
            nc.clip_grad_norm(lm.params, cfg.grad_clip)
            opt.step()
            losses.append(loss.item())
        dev_ppl = perplexity(lm, dev) if dev else float("nan")
        lm.history.append((epoch, float(np.mean(losses)), dev_ppl))
        log.info("rnnlm epoch %d loss %.4f dev ppl %.4f", epoch, np.mean(losses), dev_ppl)
    return lm
