"""Mini-batch joint CTC/attention training and transfer learning."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import numcore as nc
from ..augment import AugmentPolicy, spec_augment
from ..ctc import BLANK, collapse_path
from ..errors import CheckpointError, ConfigError, TrainingError
from ..numcore import Adam, ModelParams, Tape, clip_grad_norm, save_params
from ..scoring import EditCounts, edit_distance
from .config import ModelConfig, MtlConfig
from .data import Example
from .transformer import batch_losses, check_compatible, mtl_combine, pad_batch

log = logging.getLogger(__name__)

LOG_HEADER = "epoch\ttrain_loss\tvalid_loss\tvalid_greedy_cer"


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_cer: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.train_loss:.6f}\t{self.valid_loss:.6f}\t{self.valid_cer:.6f}"


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


@dataclass
class EvalResult:
    loss: float
    cer: float
    hyps: dict[str, list[int]]


def batches(n: int, size: int, rng: np.random.Generator | None) -> list[np.ndarray]:
    order = rng.permutation(n) if rng is not None else np.arange(n)
    return [order[i : i + size] for i in range(0, n, size)]


def evaluate(examples: Sequence[Example], params: ModelParams, cfg: ModelConfig, lam: float,
             batch_size: int = 32) -> EvalResult:
    """Eval-mode mean per-utterance MTL loss and pooled greedy-CTC CER."""
    if not examples:
        return EvalResult(float("nan"), float("nan"), {})
    total_loss = 0.0
    counts = EditCounts()
    hyps: dict[str, list[int]] = {}
    for idx in batches(len(examples), batch_size, None):
        exs = [examples[i] for i in idx]
        x, lengths = pad_batch([e.feats for e in exs], cfg.subsample_factor)
        ctc, _, att_per, logits, hl = batch_losses(x, lengths, [e.targets for e in exs], params, cfg)
        total_loss += float((lam * ctc.data + (1.0 - lam) * att_per).sum())
        for b, e in enumerate(exs):
            hyp = collapse_path(np.argmax(logits.data[b, : hl[b]], axis=1).tolist(), BLANK)
            hyps[e.utt_id] = hyp
            counts = counts + edit_distance(e.targets, hyp)
    return EvalResult(total_loss / len(examples), counts.cer, hyps)


def _step(params: ModelParams, opt: Adam, exs: list[Example], cfg: ModelConfig, mtl: MtlConfig,
          policy: AugmentPolicy | None, rng: np.random.Generator, lr: float) -> float:
    feats = [e.feats for e in exs]
    if policy is not None and policy.use_specaug:
        feats = [spec_augment(f, policy, rng) for f in feats]
    x, lengths = pad_batch(feats, cfg.subsample_factor)
    params.zero_grad()
    with Tape() as tape:
        ctc, att, _, _, _ = batch_losses(x, lengths, [e.targets for e in exs], params, cfg,
                                         mtl.label_smoothing, training=True, rng=rng,
                                         utt_ids=[e.utt_id for e in exs])
        loss = mtl_combine(nc.sum_(ctc), att, mtl.ctc_weight, len(exs))
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingError(f"non-finite loss in batch {[e.utt_id for e in exs]}")
    tape.backward(loss)
    for _, t in params.items():
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
    if mtl.grad_clip > 0:
        clip_grad_norm(params, mtl.grad_clip)
    opt.step(lr)
    return value


def train(
    train_set: Sequence[Example],
    params: ModelParams,
    cfg: ModelConfig,
    mtl: MtlConfig,
    valid_set: Sequence[Example] | None = None,
    policy: AugmentPolicy | None = None,
    log_path: str | Path | None = None,
    ckpt_dir: str | Path | None = None,
) -> TrainResult:
    """Train a copy of ``params``; the input parameters are never modified.

    With ``mtl.select_best`` and a validation set, the returned parameters are
    those of the epoch with the lowest validation greedy CER (ties: lower loss).
    """
    if not train_set and mtl.epochs:
        raise TrainingError("empty training set")
    check_compatible(params, cfg)
    params = params.copy()
    opt = Adam(params, lr=mtl.lr, betas=mtl.betas, eps=mtl.eps)
    shuffle_rng = np.random.default_rng([mtl.seed, 1])
    noise_rng = np.random.default_rng([mtl.seed, 2])
    result = TrainResult(params)
    best_key = None
    lines = [LOG_HEADER]
    if ckpt_dir is not None:
        Path(ckpt_dir).mkdir(parents=True, exist_ok=True)
    step = 0
    for epoch in range(1, mtl.epochs + 1):
        losses = []
        for idx in batches(len(train_set), mtl.batch_size, shuffle_rng):
            losses.append(_step(params, opt, [train_set[i] for i in idx], cfg, mtl, policy,
                                noise_rng, mtl.lr_at(step)))
            step += 1
        train_loss = float(np.mean(losses))
        if valid_set:
            ev = evaluate(valid_set, params, cfg, mtl.ctc_weight)
            rec = EpochRecord(epoch, train_loss, ev.loss, ev.cer)
        else:
            rec = EpochRecord(epoch, train_loss, float("nan"), float("nan"))
        result.history.append(rec)
        lines.append(rec.line())
        log.info("epoch %d: %s", epoch, rec.line())
        if ckpt_dir is not None:
            save_params(Path(ckpt_dir) / f"epoch{epoch:03d}.ckpt", params)
        if mtl.select_best and valid_set:
            key = (rec.valid_cer, rec.valid_loss)
            if best_key is None or key < best_key:
                best_key = key
                result.params = params.copy()
                result.best_epoch = epoch
        else:
            result.params = params
            result.best_epoch = epoch
    if log_path is not None:
        Path(log_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return result


def transfer_learn(
    pretrained: ModelParams,
    child_set: Sequence[Example],
    cfg: ModelConfig,
    mtl: MtlConfig,
    valid_set: Sequence[Example] | None = None,
    policy: AugmentPolicy | None = None,
    log_path: str | Path | None = None,
    ckpt_dir: str | Path | None = None,
) -> TrainResult:
    """Retrain every tensor of a pretrained model on child data (nothing frozen)."""
    try:
        check_compatible(pretrained, cfg)
    except ConfigError as exc:
        raise CheckpointError(f"pretrained model does not fit the configuration: {exc}") from exc
    return train(child_set, pretrained, cfg, mtl, valid_set, policy, log_path, ckpt_dir)
