"""Character error rate: Levenshtein alignment and corpus-level reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ScoringError
from .textnorm import UNK_TOKEN, Manifest, transcript_chars


@dataclass(frozen=True)
class EditCounts:
    sub: int = 0
    ins: int = 0
    dele: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.sub + self.ins + self.dele

    @property
    def cer(self) -> float:
        return self.errors / self.ref_len if self.ref_len else 0.0

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.sub + other.sub, self.ins + other.ins,
                          self.dele + other.dele, self.ref_len + other.ref_len)


def _encode(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> tuple[np.ndarray, np.ndarray]:
    ids: dict = {}
    r = np.array([ids.setdefault(t, len(ids)) for t in ref], dtype=np.int64)
    h = np.array([ids.setdefault(t, len(ids)) for t in hyp], dtype=np.int64)
    return r, h


def edit_distance(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> EditCounts:
    """Minimal unit-cost alignment; the backtrace prefers substitution, then insertion, then deletion."""
    r, h = _encode(ref, hyp)
    d = kernels.edit_table(r, h)
    i, j = len(r), len(h)
    s = ins = de = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (r[i - 1] != h[j - 1]):
            s += int(r[i - 1] != h[j - 1])
            i, j = i - 1, j - 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            de += 1
            i -= 1
    return EditCounts(s, ins, de, len(r))


@dataclass
class GroupReport:
    counts: EditCounts
    per_speaker: dict[str, float]
    speaker_std: float

    @property
    def cer(self) -> float:
        return self.counts.cer


@dataclass
class ScoreReport:
    overall: GroupReport
    subsets: dict[str, GroupReport] = field(default_factory=dict)
    per_utterance: dict[str, EditCounts] = field(default_factory=dict)

    @property
    def cer(self) -> float:
        return self.overall.cer


def _group(utts: list[str], counts: Mapping[str, EditCounts], speakers: Mapping[str, str]) -> GroupReport:
    total = EditCounts()
    by_spk: dict[str, EditCounts] = {}
    for u in utts:
        total = total + counts[u]
        by_spk[speakers[u]] = by_spk.get(speakers[u], EditCounts()) + counts[u]
    per = {s: c.cer for s, c in sorted(by_spk.items()) if c.ref_len > 0}
    std = float(np.std(list(per.values()))) if per else 0.0
    return GroupReport(total, per, std)


def score_corpus(
    refs: Mapping[str, str],
    hyps: Mapping[str, str],
    manifest: Manifest,
    exclude_unk: bool = False,
) -> ScoreReport:
    """Pooled CER over the manifest's utterances, overall and per subset tag.

    A manifest utterance without a hypothesis is scored against an empty one.
    """
    missing = sorted(u for u in hyps if u not in refs)
    if missing:
        raise ScoringError(f"hypotheses without references: {', '.join(missing)}")
    speakers = {r.utt_id: r.speaker_id for r in manifest}
    counts: dict[str, EditCounts] = {}
    by_subset: dict[str, list[str]] = {}
    for r in manifest:
        if r.utt_id not in refs:
            raise ScoringError(f"no reference for {r.utt_id}")
        ref = transcript_chars(refs[r.utt_id])
        if exclude_unk and UNK_TOKEN in ref:
            continue
        counts[r.utt_id] = edit_distance(ref, transcript_chars(hyps.get(r.utt_id, "")))
        by_subset.setdefault(r.subset, []).append(r.utt_id)
    report = ScoreReport(_group(list(counts), counts, speakers), per_utterance=counts)
    for tag in sorted(by_subset):
        report.subsets[tag] = _group(by_subset[tag], counts, speakers)
    return report


def format_report(report: ScoreReport, title: str = "") -> str:
    lines = [title] if title else []
    lines.append(f"{'set':<8}{'CER':>9}{'spk std':>10}{'S':>7}{'I':>7}{'D':>7}{'N':>8}")
    rows = [("overall", report.overall)] + list(report.subsets.items())
    for name, g in rows:
        c = g.counts
        lines.append(f"{name:<8}{100 * g.cer:>8.2f}%{100 * g.speaker_std:>9.2f}%"
                     f"{c.sub:>7}{c.ins:>7}{c.dele:>7}{c.ref_len:>8}")
    return "\n".join(lines) + "\n"


def report_tsv(report: ScoreReport) -> str:
    lines = ["group\tcer\tspeaker_std\tsub\tins\tdel\tref_len"]
    rows = [("overall", report.overall)] + list(report.subsets.items())
    for name, g in rows:
        c = g.counts
        lines.append(f"{name}\t{g.cer:.6f}\t{g.speaker_std:.6f}\t{c.sub}\t{c.ins}\t{c.dele}\t{c.ref_len}")
    for name, g in rows[1:]:
        for spk, cer in g.per_speaker.items():
            lines.append(f"speaker:{spk}\t{cer:.6f}\t\t\t\t\t")
    return "\n".join(lines) + "\n"
