"""Transcript normalisation, pinyin lexicon parsing, character vocabularies,
manifests, and speaker-level corpus partitioning."""

from __future__ import annotations

import random
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import LexiconError, ParseError, PartitionError

BLANK_TOKEN = "<blank>"
UNK_TOKEN = "<unk>"
SOS_EOS_TOKEN = "<sos/eos>"
SPECIAL_TOKENS = (BLANK_TOKEN, UNK_TOKEN, SOS_EOS_TOKEN)
BLANK_ID, UNK_ID, SOS_EOS_ID = 0, 1, 2

SUBSETS = ("A", "C1", "C2")

DIGIT_MAP = {
    "0": "零", "1": "一", "2": "二", "3": "三", "4": "四",
    "5": "五", "6": "六", "7": "七", "8": "八", "9": "九",
}
# full-width digits share the table
DIGIT_MAP.update({chr(ord("０") + i): DIGIT_MAP[str(i)] for i in range(10)})

# symbols outside Unicode P* that still count as punctuation in transcripts
EXTRA_PUNCTUATION = frozenset("～〜｀＾＋＝｜＜＞￥$^`|~<>+=")

INITIALS = (
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
    "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s",
)

FINALS = frozenset(
    """
    a o e ai ei ao ou an en ang eng ong er
    i ia ie iao iu ian in iang ing iong
    u ua uo uai ui uan un uang ueng ue
    v ve van vn
    yi ya ye yao you yan yin yang ying yong yu yue yuan yun
    wu wa wo wai wei wan wen wang weng
    """.split()
)

# every syllable of the synthetic character inventory plus coverage of each final
SYLLABLE_FIXTURE = (
    "ling2", "yi1", "er4", "san1", "si4", "wu3", "liu4", "qi1", "ba1", "jiu3",
    "ni3", "hao3", "wo3", "men5", "shi4", "de5", "da4", "xiao3", "tian1", "shang4",
    "ren2", "jia1", "zhong1", "guo2", "kan4", "shu1", "chi1", "fan4", "mao1", "gou3",
    "a4", "o2", "e4", "ai4", "ei1", "ao2", "ou1", "an1", "en1", "ang2", "eng1",
    "hong2", "er2", "lia3", "xie4", "miao4", "niu2", "bian1", "lin2", "liang3",
    "ming2", "xiong2", "zhu1", "hua1", "duo1", "kuai4", "gui4", "huan2", "lun2",
    "zhuang4", "lve4", "nv3", "lvan2", "jue2", "ya1", "ye3", "yao4", "you3",
    "yan2", "yin1", "yang2", "ying1", "yong3", "yu2", "yue4", "yuan2", "yun4",
    "wa1", "wo4", "wai4", "wei4", "wan3", "wen2", "wang2", "weng1", "ma5", "le5",
)

_INITIALS_LONGEST_FIRST = sorted(INITIALS, key=len, reverse=True)
_SYLLABLE_RE = re.compile(r"^([a-zü]+?)([1-5])?$")
_LATIN_RUN = re.compile(r"[A-Za-zＡ-Ｚａ-ｚ]+")


# ---------------------------------------------------------------- normalisation


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in EXTRA_PUNCTUATION


def _normalize_segment(text: str) -> str:
    text = "".join(DIGIT_MAP.get(ch, ch) for ch in text)
    text = "".join(ch for ch in text if not _is_punct(ch))
    return _LATIN_RUN.sub(UNK_TOKEN, text)


def normalize_transcript(raw: str, vocab: "Vocabulary | None" = None) -> str:
    """Map Arabic digits to Chinese numerals, drop punctuation, and replace each
    maximal Latin-letter run with the unknown token.  Idempotent."""
    unk = vocab.tokens[UNK_ID] if vocab is not None else UNK_TOKEN
    pieces = raw.split(unk)
    return unk.join(_normalize_segment(p) for p in pieces)


# ---------------------------------------------------------------- lexicon


@dataclass(frozen=True)
class LexiconEntry:
    syllable: str
    initial: str
    final: str
    tone: int

    def spelled(self) -> str:
        return f"{self.initial}{self.final}{self.tone}"


def parse_pinyin(syllable: str) -> LexiconEntry:
    """Split a toned pinyin syllable into initial, final and tone (5 = neutral)."""
    m = _SYLLABLE_RE.match(syllable)
    if not m:
        raise LexiconError(f"cannot parse pinyin syllable {syllable!r}")
    body, tone = m.group(1).replace("ü", "v"), int(m.group(2) or 5)
    initial = next((c for c in _INITIALS_LONGEST_FIRST if body.startswith(c)), "")
    final = body[len(initial):]
    if final not in FINALS:
        raise LexiconError(f"syllable {syllable!r}: {final!r} is not a known final")
    return LexiconEntry(syllable=syllable, initial=initial, final=final, tone=tone)


def write_lexicon(entries: Iterable[tuple[str, LexiconEntry]], path: str | Path) -> None:
    """Write ``(character, entry)`` pairs; columns: syllable, initial, final, tone."""
    with open(path, "w", encoding="utf-8") as fh:
        for char, e in entries:
            fh.write(f"{char}\t{e.syllable}\t{e.initial}\t{e.final}\t{e.tone}\n")


def read_lexicon(path: str | Path) -> list[tuple[str, LexiconEntry]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise ParseError(f"{path}:{n}: expected 5 tab-separated fields")
            char, syl, ini, fin, tone = parts
            out.append((char, LexiconEntry(syl, ini, fin, int(tone))))
    return out


# ---------------------------------------------------------------- vocabulary


class Vocabulary:
    """Dense token <-> id map; ids 0, 1, 2 are blank, unknown and sos/eos."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:3]) != SPECIAL_TOKENS:
            raise ValueError(f"vocabulary must start with {SPECIAL_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    blank_id = BLANK_ID
    unk_id = UNK_ID
    sos_eos_id = SOS_EOS_ID

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.tokens[i] for i in ids)

    def label_ids(self) -> list[int]:
        """Ids a hypothesis may contain (everything except blank and sos/eos)."""
        return [i for i in range(len(self.tokens)) if i not in (BLANK_ID, SOS_EOS_ID)]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())


def tokenize_chars(transcript: str, vocab: Vocabulary) -> list[int]:
    """One id per non-whitespace character; the unknown marker counts as one token."""
    out = []
    unk = vocab.tokens[UNK_ID]
    i = 0
    while i < len(transcript):
        if transcript.startswith(unk, i):
            out.append(UNK_ID)
            i += len(unk)
            continue
        ch = transcript[i]
        if not ch.isspace():
            out.append(vocab.id(ch))
        i += 1
    return out


def transcript_chars(transcript: str) -> list[str]:
    """Characters of a normalised transcript (unknown marker kept whole)."""
    out = []
    for k, piece in enumerate(transcript.split(UNK_TOKEN)):
        if k:
            out.append(UNK_TOKEN)
        out.extend(ch for ch in piece if not ch.isspace())
    return out


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    audio_path: str
    speaker_id: str
    subset: str
    transcript: str


@dataclass
class Manifest:
    records: list[Utterance] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.utt_id in seen:
                raise ValueError(f"duplicate utterance id {r.utt_id!r}")
            if r.subset not in SUBSETS:
                raise ValueError(f"utterance {r.utt_id!r}: invalid subset {r.subset!r}")
            seen.add(r.utt_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def speakers(self) -> list[str]:
        return sorted({r.speaker_id for r in self.records})

    def subset(self, *tags: str) -> "Manifest":
        return Manifest([r for r in self.records if r.subset in tags])

    def by_id(self) -> dict[str, Utterance]:
        return {r.utt_id: r for r in self.records}

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in self.records:
                fh.write(f"{r.utt_id}\t{r.audio_path}\t{r.speaker_id}\t{r.subset}\t{r.transcript}\n")

    @classmethod
    def read(cls, path: str | Path) -> "Manifest":
        recs = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 5:
                    raise ParseError(f"{path}:{n}: expected 5 tab-separated fields, got {len(parts)}")
                recs.append(Utterance(*parts))
        return cls(recs)

    @staticmethod
    def concat(*manifests: "Manifest") -> "Manifest":
        return Manifest([r for m in manifests for r in m.records])


def build_vocab(manifests: Iterable[Manifest]) -> Vocabulary:
    chars = set()
    n = 0
    for m in manifests:
        for r in m:
            n += 1
            chars.update(c for c in transcript_chars(r.transcript) if c not in SPECIAL_TOKENS)
    if n == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return Vocabulary(list(SPECIAL_TOKENS) + sorted(chars))


def partition(
    manifest: Manifest, ratios: Sequence[float] = (0.81, 0.09, 0.10), seed: int = 0
) -> tuple[Manifest, Manifest, Manifest]:
    """Speaker-disjoint train/validation/test split, independently per subset.

    Speakers are shuffled and each goes whole to the split furthest below its
    utterance target.  Every split of every subset receives at least one speaker.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise PartitionError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    assignment: dict[tuple[str, str], int] = {}
    for tag in SUBSETS:
        recs = [r for r in manifest if r.subset == tag]
        if not recs:
            continue
        counts: dict[str, int] = {}
        for r in recs:
            counts[r.speaker_id] = counts.get(r.speaker_id, 0) + 1
        speakers = sorted(counts)
        if len(speakers) < 3:
            raise PartitionError(f"subset {tag} has {len(speakers)} speakers; need at least 3")
        random.Random(f"{seed}:{tag}").shuffle(speakers)
        targets = [r * len(recs) for r in ratios]
        filled = [0, 0, 0]
        members = [0, 0, 0]
        for k, spk in enumerate(speakers):
            remaining = len(speakers) - k
            empty = [i for i in range(3) if members[i] == 0]
            pool = empty if remaining <= len(empty) else [0, 1, 2]
            best = max(pool, key=lambda i: (targets[i] - filled[i], -i))
            filled[best] += counts[spk]
            members[best] += 1
            assignment[tag, spk] = best
    splits: tuple[list, list, list] = ([], [], [])
    for r in manifest:
        splits[assignment[r.subset, r.speaker_id]].append(r)
    return Manifest(splits[0]), Manifest(splits[1]), Manifest(splits[2])
