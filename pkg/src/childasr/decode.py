"""Greedy CTC decoding and joint CTC/attention beam search with LM fusion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ctc import BLANK, CtcPrefixScorer, PrefixState, collapse_path
from .errors import AsrError, ConfigError, ParseError
from .model.transformer import ctc_logits, decode_step_logits, encode
from .numcore import Tensor
from .textnorm import SOS_EOS_ID, Vocabulary

log = logging.getLogger(__name__)

NEG_INF = -math.inf

# prefixes (all the same length) -> (n, V) natural-log next-token scores
StepScorer = Callable[[Sequence[tuple[int, ...]]], np.ndarray]


def greedy_ctc_decode(log_probs: np.ndarray, blank: int = BLANK) -> list[int]:
    """Frame-wise argmax (ties go to the lowest id), then collapse."""
    return collapse_path(np.argmax(np.asarray(log_probs), axis=1).tolist(), blank)


@dataclass(frozen=True)
class DecodeConfig:
    beam_width: int = 50
    ctc_weight: float = 0.3
    lm_weight: float = 0.0
    max_len_ratio: float = 1.0
    nbest: int = 50

    def __post_init__(self):
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")
        if not 1 <= self.nbest <= self.beam_width:
            raise ConfigError("nbest must lie in [1, beam_width]")
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ConfigError("ctc_weight must lie in [0, 1]")
        if self.lm_weight < 0:
            raise ConfigError("lm_weight must be >= 0")
        if self.max_len_ratio <= 0:
            raise ConfigError("max_len_ratio must be positive")


def combine(alpha: float, beta: float, ctc: float, att: float, lm: float) -> float:
    """``alpha*ctc + (1-alpha)*att + beta*lm``; a zero weight drops its term entirely."""
    total = 0.0
    if alpha > 0:
        total += alpha * ctc
    if alpha < 1:
        total += (1.0 - alpha) * att
    if beta > 0:
        total += beta * lm
    return total


@dataclass
class BeamHypothesis:
    tokens: tuple[int, ...]
    ctc: float
    att: float
    lm: float
    combined: float
    finished: bool = False
    forced: bool = False
    ctc_state: PrefixState | None = field(default=None, repr=False)

    def sort_key(self):
        return (-self.combined, self.tokens)


def beam_search_core(
    labels: Sequence[int],
    eos: int,
    cfg: DecodeConfig,
    max_len: int,
    ctc_scorer: CtcPrefixScorer | None = None,
    att_scorer: StepScorer | None = None,
    lm_scorer: StepScorer | None = None,
) -> list[BeamHypothesis]:
    """Length-synchronous joint search over pluggable scorers.

    Every score component only decreases as a hypothesis grows, so the search
    stops once ``nbest`` finished hypotheses all beat the best live one.  At
    ``max_len`` live hypotheses may only emit ``eos`` (and are flagged forced).
    """
    a, b = cfg.ctc_weight, cfg.lm_weight
    use_ctc = a > 0 and ctc_scorer is not None
    use_att = a < 1 and att_scorer is not None
    use_lm = b > 0 and lm_scorer is not None
    labels = np.asarray(labels, dtype=np.int64)
    root = BeamHypothesis((), 0.0, 0.0, 0.0, 0.0,
                          ctc_state=ctc_scorer.initial_state() if use_ctc else None)
    live = [root]
    finished: list[BeamHypothesis] = []
    for step in range(max_len + 1):
        prefixes = [h.tokens for h in live]
        att_lp = att_scorer(prefixes) if use_att else None
        lm_lp = lm_scorer(prefixes) if use_lm else None
        pool: list[BeamHypothesis] = []
        for k, h in enumerate(live):
            ctc_end = h.ctc_state.full_score() if use_ctc else 0.0
            att_end = h.att + (att_lp[k, eos] if use_att else 0.0)
            lm_end = h.lm + (lm_lp[k, eos] if use_lm else 0.0)
            finished.append(BeamHypothesis(h.tokens, ctc_end, att_end, lm_end,
                                           combine(a, b, ctc_end, att_end, lm_end),
                                           finished=True, forced=step == max_len))
            if step == max_len:
                continue
            states = ctc_scorer.extend(h.ctc_state, labels) if use_ctc else None
            for j, tok in enumerate(labels):
                c = states[j].score if use_ctc else 0.0
                at = h.att + (att_lp[k, tok] if use_att else 0.0)
                lm = h.lm + (lm_lp[k, tok] if use_lm else 0.0)
                pool.append(BeamHypothesis(h.tokens + (int(tok),), c, at, lm, combine(a, b, c, at, lm),
                                           ctc_state=states[j] if use_ctc else None))
        pool.sort(key=BeamHypothesis.sort_key)
        live = pool[: cfg.beam_width]
        finished.sort(key=BeamHypothesis.sort_key)
        if not live:
            break
        if len(finished) >= cfg.nbest and finished[cfg.nbest - 1].combined >= live[0].combined:
            break
    for h in finished:
        h.ctc_state = None
    return finished[: cfg.nbest]


# ---------------------------------------------------------------- model-backed scorers


class AttentionScorer:
    """Decoder log-probabilities for a batch of equal-length prefixes of one utterance."""

    def __init__(self, h: Tensor, h_len: int, params, cfg):
        self.h = h.data[:, :h_len]
        self.h_len = h_len
        self.params = params
        self.cfg = cfg

    def __call__(self, prefixes: Sequence[tuple[int, ...]]) -> np.ndarray:
        n = len(prefixes)
        ys = np.array([(SOS_EOS_ID,) + p for p in prefixes], dtype=np.int64)
        hb = Tensor(np.repeat(self.h, n, axis=0))
        z = decode_step_logits(hb, [self.h_len] * n, ys, self.params, self.cfg).data[:, -1]
        z = z - z.max(-1, keepdims=True)
        return z - np.log(np.exp(z).sum(-1, keepdims=True))


class NgramScorer:
    """Natural-log n-gram scores on the model vocabulary (eos column = sentence end)."""

    def __init__(self, lm, vocab: Vocabulary):
        self.lm = lm
        self.vocab = vocab
        self.cache: dict[tuple, np.ndarray] = {}

    def row(self, prefix: tuple[int, ...]) -> np.ndarray:
        hist = tuple(self.vocab.tokens[i] for i in prefix)[-(self.lm.order - 1):] if self.lm.order > 1 else ()
        if len(prefix) < self.lm.order - 1:
            hist = ("<s>",) + hist
        if hist not in self.cache:
            row = np.full(len(self.vocab), NEG_INF)
            for i in self.vocab.label_ids():
                row[i] = self.lm.logprob(self.vocab.tokens[i], hist)
            row[SOS_EOS_ID] = self.lm.logprob("</s>", hist)
            self.cache[hist] = row
        return self.cache[hist]

    def __call__(self, prefixes: Sequence[tuple[int, ...]]) -> np.ndarray:
        return np.stack([self.row(p) for p in prefixes])


def beam_search(feats: np.ndarray, params, model_cfg, vocab: Vocabulary, cfg: DecodeConfig,
                lm=None) -> list[BeamHypothesis]:
    """N-best for one utterance's features under the joint model (plus optional n-gram fusion)."""
    h, hl = encode(feats[None], [feats.shape[0]], params, model_cfg)
    z = ctc_logits(h, params).data[0, : hl[0]]
    z = z - z.max(-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(-1, keepdims=True))
    max_len = max(1, int(math.floor(cfg.max_len_ratio * int(hl[0]))))
    return beam_search_core(
        vocab.label_ids(), SOS_EOS_ID, cfg, max_len,
        ctc_scorer=CtcPrefixScorer(logp),
        att_scorer=AttentionScorer(h, int(hl[0]), params, model_cfg),
        lm_scorer=NgramScorer(lm, vocab) if lm is not None else None,
    )


# ---------------------------------------------------------------- hypothesis files

HYP_HEADER = "utt_id\trank\tcombined\tctc\tatt\tlm\ttext"


@dataclass
class HypRow:
    utt_id: str
    rank: int
    combined: float
    ctc: float
    att: float
    lm: float
    text: str


def _fmt(x: float) -> str:
    return repr(float(x))


def decode_corpus(examples, params, model_cfg, vocab: Vocabulary, cfg: DecodeConfig, lm=None,
                  out_path: str | Path | None = None) -> dict[str, list[HypRow]]:
    """Decode every example; failures are logged and the run continues."""
    out: dict[str, list[HypRow]] = {}
    for ex in examples:
        try:
            hyps = beam_search(ex.feats, params, model_cfg, vocab, cfg, lm)
        except AsrError as exc:
            log.warning("decoding %s failed: %s", ex.utt_id, exc)
            continue
        out[ex.utt_id] = [HypRow(ex.utt_id, r + 1, h.combined, h.ctc, h.att, h.lm, vocab.decode(h.tokens))
                          for r, h in enumerate(hyps)]
    if out_path is not None:
        write_hypotheses(out_path, out)
    return out


def write_hypotheses(path: str | Path, hyps: dict[str, list[HypRow]]) -> None:
    lines = [HYP_HEADER]
    for rows in hyps.values():
        for r in rows:
            lines.append("\t".join([r.utt_id, str(r.rank), _fmt(r.combined), _fmt(r.ctc), _fmt(r.att),
                                    _fmt(r.lm), r.text]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_hypotheses(path: str | Path) -> dict[str, list[HypRow]]:
    out: dict[str, list[HypRow]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != HYP_HEADER:
            raise ParseError(f"{path}:1: unexpected hypothesis header")
        for n, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 7:
                raise ParseError(f"{path}:{n}: expected 7 fields")
            try:
                row = HypRow(parts[0], int(parts[1]), float(parts[2]), float(parts[3]),
                             float(parts[4]), float(parts[5]), parts[6])
            except ValueError as exc:
                raise ParseError(f"{path}:{n}: {exc}") from exc
            out.setdefault(row.utt_id, []).append(row)
    return out


def best_texts(hyps: dict[str, list[HypRow]]) -> dict[str, str]:
    return {u: rows[0].text for u, rows in hyps.items() if rows}
