"""Synthetic stand-ins for an adult read set (A), a child read set (C1) and a
child conversational set (C2).

Transcripts come from a small phrase grammar so that character LMs have
structure to learn.  Raw transcripts occasionally spell digits with Arabic
numerals and carry punctuation; the audio always speaks the normalised text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio import Waveform, write_audio
from ..errors import SynthesisError
from ..augment import apply_rir, synth_rir, volume_perturb
from ..textnorm import Manifest, Utterance, normalize_transcript, parse_pinyin, write_lexicon
from .synth import CHARACTERS, SpeakerProfile, SynthesisSpec, default_recipes, synthesize_utterance

SUBJECTS = ("我", "你", "我们", "你们", "人", "大人", "小人", "猫", "狗", "小猫", "小狗", "大家")
VERB_OBJECTS = {
    "看": ("书", "猫", "狗", "天", "小书", "大书"),
    "吃": ("饭",),
    "是": ("中国人", "大人", "小人", "小猫", "小狗", "我家人"),
    "上": ("天",),
}
DIGITS = "零一二三四五六七八九"
ARABIC = {ch: str(i) for i, ch in enumerate(DIGITS)}


def stable_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFF


@dataclass(frozen=True)
class SubsetConfig:
    speakers: int
    utts_per_speaker: int


@dataclass
class CorpusConfig:
    subsets: dict[str, SubsetConfig] = field(default_factory=lambda: {
        "A": SubsetConfig(40, 25), "C1": SubsetConfig(10, 20), "C2": SubsetConfig(5, 20),
    })
    seed: int = 0
    sample_rate: int = 16000
    arabic_digit_prob: float = 0.3
    punctuation_prob: float = 0.5


# ---------------------------------------------------------------- text


def generate_sentence(rng: np.random.Generator) -> str:
    kind = rng.random()
    if kind < 0.15:
        n = int(rng.integers(3, 7))
        start = int(rng.integers(0, 10))
        if rng.random() < 0.5:
            return "".join(DIGITS[(start + k) % 10] for k in range(n))
        return "".join(DIGITS[int(d)] for d in rng.integers(0, 10, size=n))
    head = "你好" if rng.random() < 0.2 else ""
    subj = SUBJECTS[int(rng.integers(len(SUBJECTS)))]
    verbs = sorted(VERB_OBJECTS)
    verb = verbs[int(rng.integers(len(verbs)))]
    objs = VERB_OBJECTS[verb]
    obj = objs[int(rng.integers(len(objs)))]
    tail = ""
    if rng.random() < 0.15:
        tail = DIGITS[int(rng.integers(1, 10))]
    return head + subj + verb + obj + tail


def decorate(text: str, rng: np.random.Generator, cfg: CorpusConfig) -> str:
    """Raw-transcript surface form: some digits as Arabic numerals, optional punctuation."""
    chars = []
    for ch in text:
        if ch in ARABIC and rng.random() < cfg.arabic_digit_prob:
            chars.append(ARABIC[ch])
        else:
            chars.append(ch)
    out = "".join(chars)
    if text.startswith("你好") and rng.random() < cfg.punctuation_prob:
        out = out[:2] + "，" + out[2:]
    if rng.random() < cfg.punctuation_prob:
        out += "。！？"[int(rng.integers(3))]
    return out


# ---------------------------------------------------------------- speakers


def sample_speaker(subset: str, index: int, rng: np.random.Generator) -> tuple[SpeakerProfile, float]:
    """Profile plus a per-speaker recording gain in dB."""
    sid = f"{subset}S{index:03d}"
    room = float(rng.uniform(0.08, 0.35)) if rng.random() < 0.6 else 0.0
    gain = float(rng.uniform(-10.0, 0.0))
    if subset == "A":
        prof = SpeakerProfile(
            sid, "adult", f0_base=float(rng.uniform(95, 210)), rate=float(rng.uniform(0.9, 1.1)),
            rate_jitter=float(rng.uniform(0.03, 0.07)), formant_scale=float(rng.uniform(0.95, 1.05)),
            room_decay=room,
        )
    else:
        conversational = subset == "C2"
        prof = SpeakerProfile(
            sid, "child", f0_base=float(rng.uniform(240, 340)),
            rate=float(rng.uniform(1.1, 1.35)),
            rate_jitter=float(rng.uniform(0.15, 0.25) if conversational else rng.uniform(0.1, 0.18)),
            formant_scale=float(rng.uniform(1.15, 1.35)),
            pause_prob=0.3 if conversational else 0.0,
            room_decay=room,
        )
    return prof, gain


def record(tokens: str, speaker: SpeakerProfile, gain_db: float, seed: int,
           recipes=None, sample_rate: int = 16000) -> Waveform:
    spec = SynthesisSpec(recipes or default_recipes(), speaker, sample_rate=sample_rate)
    w = synthesize_utterance(list(tokens), spec, seed)
    if speaker.room_decay > 0:
        w = apply_rir(w, synth_rir(speaker.room_decay, seed=stable_seed("room", speaker.speaker_id),
                                   sample_rate=sample_rate))
    w, _ = volume_perturb(w, gain_db)
    return w


# ---------------------------------------------------------------- corpus


def generate_corpus(config: CorpusConfig, out_dir: str | Path) -> Manifest:
    """Write audio, ``manifest.tsv``, ``speakers.tsv`` and ``lexicon.tsv`` under ``out_dir``.

    Audio paths in the manifest are relative to ``out_dir``.  Every utterance
    draws from its own seed derived from (master seed, subset, speaker, index).
    """
    out = Path(out_dir)
    recipes = default_recipes()
    recs: list[Utterance] = []
    spk_lines = ["speaker_id\tsubset\tage_group\tf0_base\trate\trate_jitter\tformant_scale\t"
                 "pause_prob\troom_decay\tgain_db\n"]
    for subset in sorted(config.subsets):
        sc = config.subsets[subset]
        for s in range(sc.speakers):
            srng = np.random.default_rng(stable_seed(config.seed, "speaker", subset, s))
            prof, gain = sample_speaker(subset, s, srng)
            spk_lines.append(
                f"{prof.speaker_id}\t{subset}\t{prof.age_group}\t{prof.f0_base:.4f}\t{prof.rate:.4f}\t"
                f"{prof.rate_jitter:.4f}\t{prof.formant_scale:.4f}\t{prof.pause_prob:.4f}\t"
                f"{prof.room_decay:.4f}\t{gain:.4f}\n"
            )
            adir = out / "audio" / subset / prof.speaker_id
            adir.mkdir(parents=True, exist_ok=True)
            for u in range(sc.utts_per_speaker):
                useed = stable_seed(config.seed, "utt", subset, s, u)
                trng = np.random.default_rng(useed)
                text = generate_sentence(trng)
                raw = decorate(text, trng, config)
                if normalize_transcript(raw) != text:
                    raise SynthesisError(f"{raw!r} does not normalise back to {text!r}")
                uid = f"{prof.speaker_id}_{u:03d}"
                w = record(text, prof, gain, useed + 1, recipes, config.sample_rate)
                rel = f"audio/{subset}/{prof.speaker_id}/{uid}.f64"
                write_audio(out / rel, w)
                recs.append(Utterance(uid, rel, prof.speaker_id, subset, raw))
    manifest = Manifest(recs)
    manifest.write(out / "manifest.tsv")
    (out / "speakers.tsv").write_text("".join(spk_lines), encoding="utf-8")
    write_lexicon(((ch, parse_pinyin(py)) for ch, py in CHARACTERS.items()), out / "lexicon.tsv")
    return manifest
