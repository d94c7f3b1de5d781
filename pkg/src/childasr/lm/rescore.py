"""Second-pass N-best rescoring with an RNN LM."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from ..decode import HypRow, combine
from ..textnorm import transcript_chars


@dataclass
class Rescored:
    row: HypRow
    acoustic: float
    firstpass: float
    rnn: float
    final: float


def rescore_nbest(
    hyps: Sequence[HypRow],
    rnn_score: Callable[[list[str]], float],
    weight: float = 0.5,
    ctc_weight: float = 0.3,
    lm_scale: float = 1.0,
) -> list[Rescored]:
    """Re-rank one utterance's N-best list.

    ``final = acoustic + lm_scale * ((1 - weight) * firstpass_lm + weight * rnn_logprob)``
    where ``acoustic`` is the weighted CTC/attention score.  Sorting is stable,
    so equal finals keep their input order.
    """
    if not hyps:
        raise ValueError("rescoring needs a non-empty N-best list")
    out = []
    for h in hyps:
        acoustic = combine(ctc_weight, 0.0, h.ctc, h.att, 0.0)
        rnn = rnn_score(transcript_chars(h.text)) if weight else 0.0
        lm_part = (1.0 - weight) * h.lm + (weight * rnn if weight else 0.0)
        out.append(Rescored(h, acoustic, h.lm, rnn, acoustic + lm_scale * lm_part))
    return sorted(out, key=lambda r: -r.final)
