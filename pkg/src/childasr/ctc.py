"""Connectionist temporal classification: path collapse, sequence likelihood,
loss gradients via forward-backward, and incremental prefix scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, TrainingError
from .numcore import Tensor, custom_op

BLANK = 0
NEG_INF = -np.inf


def collapse_path(path: Sequence[int], blank: int = BLANK) -> list[int]:
    """Merge adjacent repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for tok in path:
        if tok != prev and tok != blank:
            out.append(int(tok))
        prev = tok
    return out


def expand_label(y: Sequence[int], blank: int = BLANK) -> np.ndarray:
    """Interleave blanks: (b, y1, b, y2, ..., yL, b)."""
    ext = np.full(2 * len(y) + 1, blank, dtype=np.int64)
    ext[1::2] = np.asarray(y, dtype=np.int64)
    return ext


def min_frames(y: Sequence[int]) -> int:
    """Fewest frames that can emit ``y``: one per label plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(y, y[1:]) if a == b)
    return len(y) + repeats


def log_normalize(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class CtcResult:
    log_prob: float
    feasible: bool


def _check(log_probs: np.ndarray, y: Sequence[int], blank: int) -> None:
    if log_probs.ndim != 2:
        raise DimensionError(f"posterior grid must be T x (K+1), got {log_probs.shape}")
    K1 = log_probs.shape[1]
    for tok in y:
        if tok == blank or not 0 <= tok < K1:
            raise DimensionError(f"label {tok} outside 1..{K1 - 1}")


def ctc_log_prob(log_probs: np.ndarray, y: Sequence[int], blank: int = BLANK) -> float:
    """log P(y | grid), summed over every frame path that collapses to ``y``.

    Returns ``-inf`` when the grid has too few frames for ``y``; use
    :func:`ctc_score` to also get the feasibility flag.
    """
    return ctc_score(log_probs, y, blank).log_prob


def ctc_score(log_probs: np.ndarray, y: Sequence[int], blank: int = BLANK) -> CtcResult:
    log_probs = np.asarray(log_probs, dtype=np.float64)
    y = list(y)
    _check(log_probs, y, blank)
    T = log_probs.shape[0]
    if T < min_frames(y) or T == 0:
        return CtcResult(NEG_INF, False)
    ext = expand_label(y, blank)
    alpha = kernels.ctc_alpha(log_probs, ext, blank)
    S = ext.shape[0]
    lp = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2]) if S > 1 else alpha[T - 1, 0]
    return CtcResult(float(lp), True)


def occupancy(log_probs: np.ndarray, y: Sequence[int], blank: int = BLANK) -> tuple[float, np.ndarray]:
    """Total log-likelihood and the T x (K+1) posterior label occupancy gamma."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    ext = expand_label(y, blank)
    alpha = kernels.ctc_alpha(log_probs, ext, blank)
    beta = kernels.ctc_beta(log_probs, ext, blank)
    T, S = alpha.shape
    ll = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2]) if S > 1 else alpha[T - 1, 0]
    post = np.exp(alpha + beta - ll)
    gamma = np.zeros_like(log_probs)
    for s in range(S):
        gamma[:, ext[s]] += post[:, s]
    return float(ll), gamma


def ctc_loss_and_grad(
    logits: np.ndarray, y: Sequence[int], blank: int = BLANK, utt_id: str | None = None
) -> tuple[float, np.ndarray]:
    """Negative log-likelihood and its gradient w.r.t. raw (pre-softmax) logits.

    The gradient is ``softmax(logits) - gamma``, so every frame row sums to zero.
    """
    logits = np.asarray(logits, dtype=np.float64)
    y = list(y)
    _check(logits, y, blank)
    if logits.shape[0] < max(1, min_frames(y)):
        where = f" in utterance {utt_id}" if utt_id else ""
        raise TrainingError(
            f"CTC target of length {len(y)} infeasible with {logits.shape[0]} frames{where}"
        )
    log_probs = log_normalize(logits)
    ll, gamma = occupancy(log_probs, y, blank)
    return -ll, np.exp(log_probs) - gamma


def ctc_loss(
    logits: Tensor,
    targets: Sequence[Sequence[int]],
    lengths: Sequence[int] | None = None,
    blank: int = BLANK,
    utt_ids: Sequence[str] | None = None,
) -> Tensor:
    """Per-utterance CTC losses as a tape op.

    ``logits`` is (B, T, K+1) with the first ``lengths[b]`` frames valid, or a
    single (T, K+1) grid with ``targets`` a single label sequence.  Returns a
    (B,) tensor (or a scalar for the single-grid form).
    """
    single = logits.ndim == 2
    data = logits.data[None] if single else logits.data
    if single:
        targets = [targets]
    B, Tmax, _ = data.shape
    lengths = [Tmax] * B if lengths is None else list(lengths)
    losses = np.zeros(B)
    grad = np.zeros_like(data)
    for b in range(B):
        uid = utt_ids[b] if utt_ids else None
        loss, g = ctc_loss_and_grad(data[b, : lengths[b]], targets[b], blank, uid)
        losses[b] = loss
        grad[b, : lengths[b]] = g

    def backward(gout):
        gfull = grad * np.reshape(gout, (B, 1, 1))
        return (gfull[0] if single else gfull,)

    value = losses[0] if single else losses
    return custom_op((logits,), value, backward)


# ---------------------------------------------------------------- prefix scoring


@dataclass
class PrefixState:
    """Forward mass of one prefix: r[t, 0] ends in a label, r[t, 1] in blank."""

    r: np.ndarray
    last: int
    score: float
    length: int

    def full_score(self) -> float:
        """log-probability that the labelling is exactly this prefix."""
        return float(np.logaddexp(self.r[-1, 0], self.r[-1, 1]))


class CtcPrefixScorer:
    """Incremental CTC prefix probabilities over one posterior grid."""

    def __init__(self, log_probs: np.ndarray, blank: int = BLANK):
        self.log_probs = np.ascontiguousarray(log_probs, dtype=np.float64)
        self.blank = blank

    def initial_state(self) -> PrefixState:
        T = self.log_probs.shape[0]
        r = np.full((T, 2), NEG_INF)
        r[:, 1] = np.cumsum(self.log_probs[:, self.blank])
        # the empty prefix is a prefix of every labelling: total mass 1
        return PrefixState(r=r, last=-1, score=0.0, length=0)

    def extend(self, state: PrefixState, cands: Sequence[int]) -> list[PrefixState]:
        cands = np.asarray(cands, dtype=np.int64)
        r, psi = kernels.ctc_prefix_extend(
            self.log_probs, state.r, state.last, cands, self.blank, state.length == 0
        )
        return [
            PrefixState(r=np.ascontiguousarray(r[:, :, j]), last=int(c), score=float(psi[j]),
                        length=state.length + 1)
            for j, c in enumerate(cands)
        ]


def ctc_prefix_score(log_probs: np.ndarray, prefix: Sequence[int], blank: int = BLANK) -> tuple[float, PrefixState]:
    """log of the total probability of every labelling that starts with ``prefix``."""
    scorer = CtcPrefixScorer(log_probs, blank)
    state = scorer.initial_state()
    for tok in prefix:
        (state,) = scorer.extend(state, [tok])
    return state.score, state
