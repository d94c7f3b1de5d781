"""Formant synthesis of Mandarin-like syllables for the synthetic corpora.

Each character is rendered from its pinyin: the initial becomes an onset
(noise burst, aspiration, frication or a voiced murmur), the final becomes a
harmonic vowel whose formants glide through the final's vowel targets into an
optional nasal coda, and the tone shapes the F0 contour.  Speaker profiles
scale F0, formants and timing; child profiles sit higher in F0 and formant
scale and vary more in rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import Waveform
from ..errors import SynthesisError
from ..textnorm import LexiconEntry, parse_pinyin

# character -> toned pinyin; the whole synthetic inventory
CHARACTERS: dict[str, str] = {
    "零": "ling2", "一": "yi1", "二": "er4", "三": "san1", "四": "si4",
    "五": "wu3", "六": "liu4", "七": "qi1", "八": "ba1", "九": "jiu3",
    "你": "ni3", "好": "hao3", "我": "wo3", "们": "men5", "是": "shi4",
    "大": "da4", "小": "xiao3", "天": "tian1", "上": "shang4", "人": "ren2",
    "家": "jia1", "中": "zhong1", "国": "guo2", "看": "kan4", "书": "shu1",
    "吃": "chi1", "饭": "fan4", "猫": "mao1", "狗": "gou3",
}

# (F1, F2) in Hz for a reference adult vocal tract
VOWELS: dict[str, tuple[float, float]] = {
    "a": (750, 1250), "A": (700, 1050), "o": (500, 850), "e": (460, 1550),
    "E": (550, 1850), "@": (500, 1400), "i": (290, 2250), "u": (320, 750),
    "y": (290, 1800), "I": (380, 1500), "r": (520, 1350),
}
NASAL_CODA = {"n": (250, 1600), "ng": (250, 1000)}

# final -> (vowel target string, coda)
FINAL_SHAPES: dict[str, tuple[str, str]] = {
    "a": ("a", ""), "o": ("uo", ""), "e": ("e", ""), "ai": ("ai", ""), "ei": ("Ei", ""),
    "ao": ("Ao", ""), "ou": ("ou", ""), "an": ("a", "n"), "en": ("@", "n"),
    "ang": ("A", "ng"), "eng": ("@", "ng"), "ong": ("u", "ng"), "er": ("r", ""),
    "i": ("i", ""), "ia": ("ia", ""), "ie": ("iE", ""), "iao": ("iAo", ""), "iu": ("iou", ""),
    "ian": ("iE", "n"), "in": ("i", "n"), "iang": ("iA", "ng"), "ing": ("i", "ng"),
    "iong": ("yu", "ng"), "u": ("u", ""), "ua": ("ua", ""), "uo": ("uo", ""),
    "uai": ("uai", ""), "ui": ("uEi", ""), "uan": ("ua", "n"), "un": ("u@", "n"),
    "uang": ("uA", "ng"), "ueng": ("u@", "ng"), "ue": ("yE", ""),
    "v": ("y", ""), "ve": ("yE", ""), "van": ("yE", "n"), "vn": ("y", "n"),
}
ZERO_INITIAL_SPELLING = {
    "yi": "i", "ya": "ia", "ye": "ie", "yao": "iao", "you": "iu", "yan": "ian", "yin": "in",
    "yang": "iang", "ying": "ing", "yong": "iong", "yu": "v", "yue": "ve", "yuan": "van",
    "yun": "vn", "wu": "u", "wa": "ua", "wo": "uo", "wai": "uai", "wei": "ui", "wan": "uan",
    "wen": "un", "wang": "uang", "weng": "ueng",
}
SIBILANTS = {"zh", "ch", "sh", "r", "z", "c", "s"}

# initial -> (kind, centre Hz, duration s); kinds: stop, asp, fric, nasal, liquid
ONSETS: dict[str, tuple[str, float, float]] = {
    "b": ("stop", 800, 0.012), "d": ("stop", 3500, 0.012), "g": ("stop", 1800, 0.015),
    "p": ("asp", 800, 0.05), "t": ("asp", 3500, 0.05), "k": ("asp", 1800, 0.055),
    "f": ("fric", 5000, 0.06), "s": ("fric", 6500, 0.07), "sh": ("fric", 3500, 0.07),
    "x": ("fric", 4500, 0.07), "h": ("fric", 1500, 0.05),
    "z": ("stop", 6000, 0.03), "c": ("asp", 6000, 0.06), "zh": ("stop", 3200, 0.03),
    "ch": ("asp", 3200, 0.06), "j": ("stop", 4300, 0.03), "q": ("asp", 4300, 0.06),
    "m": ("nasal", 250, 0.05), "n": ("nasal", 300, 0.05),
    "l": ("liquid", 350, 0.04), "r": ("liquid", 400, 0.045),
}

TONE_CONTOURS: dict[int, tuple[float, ...]] = {
    1: (1.15, 1.15),
    2: (0.95, 1.2),
    3: (0.9, 0.75, 0.95),
    4: (1.25, 0.8),
    5: (1.0, 0.95),
}


@dataclass(frozen=True)
class TokenRecipe:
    """How one character sounds for the reference speaker."""

    onset: tuple[str, float, float] | None
    targets: tuple[tuple[float, float], ...]
    coda: tuple[float, float] | None
    tone: int
    duration: float


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    age_group: str
    f0_base: float
    rate: float
    rate_jitter: float
    formant_scale: float
    pause_prob: float = 0.0
    room_decay: float = 0.0

    def __post_init__(self):
        if self.f0_base <= 0:
            raise ValueError("f0_base must be positive")
        if self.age_group not in ("adult", "child"):
            raise ValueError(f"unknown age group {self.age_group!r}")


@dataclass
class SynthesisSpec:
    recipes: dict[str, TokenRecipe]
    speaker: SpeakerProfile
    noise_floor: float = 0.002
    lead_silence: float = 0.10
    trail_silence: float = 0.10
    min_token_duration: float = 0.10
    sample_rate: int = 16000
    extras: dict = field(default_factory=dict)


def canonical_final(entry: LexiconEntry) -> str:
    final = entry.final
    if not entry.initial:
        final = ZERO_INITIAL_SPELLING.get(final, final)
    elif entry.initial in ("j", "q", "x") and final.startswith("u"):
        final = "v" + final[1:]
    return final


def recipe_for(pinyin: str, base_duration: float = 0.16) -> TokenRecipe:
    entry = parse_pinyin(pinyin)
    final = canonical_final(entry)
    if final not in FINAL_SHAPES:
        raise SynthesisError(f"no vowel shape for final {final!r} ({pinyin})")
    vowels, coda = FINAL_SHAPES[final]
    if entry.initial in SIBILANTS and vowels == "i":
        vowels = "I"
    onset = ONSETS[entry.initial] if entry.initial else None
    dur = base_duration * (0.8 if entry.tone == 5 else 1.0)
    return TokenRecipe(
        onset=onset,
        targets=tuple(VOWELS[v] for v in vowels),
        coda=NASAL_CODA[coda] if coda else None,
        tone=entry.tone,
        duration=dur,
    )


def default_recipes() -> dict[str, TokenRecipe]:
    return {ch: recipe_for(py) for ch, py in CHARACTERS.items()}


def _band_noise(n: int, centre: float, sr: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    width = max(centre / 3.0, 300.0)
    spec *= np.exp(-0.5 * ((freqs - centre) / width) ** 2)
    out = np.fft.irfft(spec, n=n)
    peak = np.abs(out).max()
    return out / peak if peak > 0 else out


def _ramp(n: int, sr: int, ms: float = 8.0) -> np.ndarray:
    env = np.ones(n)
    k = min(n // 2, int(sr * ms / 1000))
    if k > 0:
        r = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, k))
        env[:k] *= r
        env[n - k:] *= r[::-1]
    return env


def _harmonic(f0: np.ndarray, f1: np.ndarray, f2: np.ndarray, scale: float, sr: int) -> np.ndarray:
    """Sum of harmonics of the F0 track, weighted by a two-formant resonance envelope."""
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    out = np.zeros_like(f0)
    top = 5000.0 * scale
    bw1, bw2 = 90.0 * scale, 130.0 * scale
    f3 = 2800.0 * scale
    for k in range(1, int(top / f0.min()) + 1):
        fk = k * f0
        amp = (1.0 / (1.0 + ((fk - f1) / bw1) ** 2)
               + 0.6 / (1.0 + ((fk - f2) / bw2) ** 2)
               + 0.15 / (1.0 + ((fk - f3) / (200.0 * scale)) ** 2))
        amp = np.where(fk < min(top, sr / 2 - 200), amp, 0.0)
        out += amp * np.sin(k * phase)
    return out


def _trajectory(points: list[tuple[float, float]], n: int) -> tuple[np.ndarray, np.ndarray]:
    if len(points) == 1:
        return np.full(n, points[0][0]), np.full(n, points[0][1])
    xp = np.linspace(0.0, 1.0, len(points))
    x = np.linspace(0.0, 1.0, n)
    return np.interp(x, xp, [p[0] for p in points]), np.interp(x, xp, [p[1] for p in points])


def render_token(recipe: TokenRecipe, speaker: SpeakerProfile, duration: float,
                 sr: int, rng: np.random.Generator) -> np.ndarray:
    n = max(1, int(round(duration * sr)))
    out = np.zeros(n)
    scale = speaker.formant_scale
    onset_n = 0
    if recipe.onset is not None:
        kind, centre, dur = recipe.onset
        onset_n = min(int(dur * sr * speaker.rate), n // 3)
        if kind in ("stop", "asp", "fric"):
            burst = _band_noise(onset_n, min(centre * scale, sr / 2 - 500), sr, rng)
            level = {"stop": 0.5, "asp": 0.35, "fric": 0.3}[kind]
            decay = np.exp(-np.linspace(0, 3.0 if kind == "stop" else 1.0, onset_n))
            out[:onset_n] += level * burst * decay * _ramp(onset_n, sr, 3.0)
    contour = TONE_CONTOURS[recipe.tone]
    xp = np.linspace(0.0, 1.0, len(contour))
    f0 = speaker.f0_base * np.interp(np.linspace(0.0, 1.0, n), xp, contour)
    f0 *= np.exp(rng.normal(0.0, 0.02))
    points = list(recipe.targets)
    if recipe.coda is not None:
        points.append(recipe.coda)
    if recipe.onset is not None and recipe.onset[0] in ("nasal", "liquid"):
        points.insert(0, (recipe.onset[1], 1200.0))
    f1, f2 = _trajectory(points, n)
    voiced = _harmonic(f0, f1 * scale, f2 * scale, scale, sr)
    env = np.zeros(n)
    start = onset_n if recipe.onset is not None and recipe.onset[0] in ("stop", "asp", "fric") else 0
    env[start:] = _ramp(n - start, sr, 12.0)
    if recipe.coda is not None:
        tail = int(0.3 * n)
        env[n - tail:] *= np.linspace(1.0, 0.45, tail)
    voiced *= env
    peak = np.abs(voiced).max()
    if peak > 0:
        voiced /= peak
    out += 0.8 * voiced
    return out


def synthesize_utterance(tokens, spec: SynthesisSpec, seed: int) -> Waveform:
    """Waveform for a character sequence; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    sr = spec.sample_rate
    spk = spec.speaker
    pieces = [np.zeros(int(round(spec.lead_silence * sr)))]
    for k, tok in enumerate(tokens):
        recipe = spec.recipes.get(tok)
        if recipe is None:
            raise SynthesisError(f"no synthesis recipe for token {tok!r}")
        dur = recipe.duration * spk.rate * float(np.exp(rng.normal(0.0, spk.rate_jitter)))
        dur = max(dur, spec.min_token_duration)
        pieces.append(0.9 * render_token(recipe, spk, dur, sr, rng))
        if k + 1 < len(tokens):
            gap = rng.uniform(0.01, 0.03)
            if spk.pause_prob and rng.random() < spk.pause_prob:
                gap += rng.uniform(0.05, 0.25)
            pieces.append(np.zeros(int(round(gap * sr))))
    pieces.append(np.zeros(int(round(spec.trail_silence * sr))))
    x = np.concatenate(pieces)
    x = x + spec.noise_floor * rng.standard_normal(x.shape[0])
    return Waveform(np.clip(x, -1.0, 1.0), sr)
