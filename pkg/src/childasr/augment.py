"""Speed and volume perturbation, reverberation, SpecAugment, and the
manifest expander that materialises augmented training variants."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .audio import Waveform
from .errors import ParameterError
from .textnorm import Manifest, Utterance


@dataclass
class AugmentPolicy:
    speed_factors: tuple[float, ...] = (0.9, 1.0, 1.1)
    volume_range_db: tuple[float, float] = (-6.0, 6.0)
    use_volume: bool = False
    use_rir: bool = False
    rir_decays: tuple[float, ...] = (0.15, 0.25, 0.4)
    rir_prob: float = 0.5
    rir_pool: list[Waveform] = field(default_factory=list)
    use_specaug: bool = False
    num_time_masks: int = 2
    max_time_width: int = 20
    num_freq_masks: int = 2
    max_freq_width: int = 10
    others_subsets: tuple[str, ...] = ("C1", "C2")

    def __post_init__(self):
        if any(f <= 0 for f in self.speed_factors):
            raise ParameterError("speed factors must be positive")
        lo, hi = self.volume_range_db
        if lo > hi:
            raise ParameterError("volume range must satisfy lo <= hi")
        if min(self.num_time_masks, self.max_time_width, self.num_freq_masks, self.max_freq_width) < 0:
            raise ParameterError("mask counts and widths must be non-negative")

    @classmethod
    def speed_only(cls) -> "AugmentPolicy":
        return cls()

    @classmethod
    def speed_and_others(cls) -> "AugmentPolicy":
        return cls(use_volume=True, use_rir=True, use_specaug=True)

    def pool(self, sample_rate: int = 16000) -> list[Waveform]:
        if not self.rir_pool:
            self.rir_pool = [synth_rir(d, seed=1000 + i, sample_rate=sample_rate)
                             for i, d in enumerate(self.rir_decays)]
        return self.rir_pool


# ---------------------------------------------------------------- waveform ops


def speed_perturb(w: Waveform, factor: float) -> Waveform:
    """Linear-interpolation resampling at stride ``factor`` (pitch and tempo both scale)."""
    if factor <= 0:
        raise ParameterError(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return Waveform(w.samples.copy(), w.sample_rate)
    n = len(w)
    # the epsilon stops 99 / 1.1 = 89.99999... from losing a sample
    m = int(np.floor((n - 1) / factor + 1e-9)) + 1 if n else 0
    pos = np.arange(m) * factor
    return Waveform(np.interp(pos, np.arange(n), w.samples), w.sample_rate)


def volume_perturb(w: Waveform, gain_db: float) -> tuple[Waveform, int]:
    """Scale by ``10**(gain_db/20)`` and hard-clip to [-1, 1]; also returns the clip count."""
    y = w.samples * 10.0 ** (gain_db / 20.0)
    clipped = int(np.count_nonzero(np.abs(y) > 1.0))
    return Waveform(np.clip(y, -1.0, 1.0), w.sample_rate), clipped


def apply_rir(w: Waveform, rir: Waveform) -> Waveform:
    """Full linear convolution, rescaled so the output peak equals the input peak."""
    if w.sample_rate != rir.sample_rate:
        raise ParameterError(f"sample rates differ: {w.sample_rate} vs {rir.sample_rate}")
    y = fftconvolve(w.samples, rir.samples, mode="full")
    peak_in = np.abs(w.samples).max() if len(w) else 0.0
    peak_out = np.abs(y).max() if y.size else 0.0
    if peak_out > 0:
        y *= peak_in / peak_out
    return Waveform(y, w.sample_rate)


def synth_rir(decay_time_s: float, seed: int, sample_rate: int = 16000) -> Waveform:
    """Exponentially decaying noise tail behind a unit direct-path impulse.

    The amplitude envelope falls 60 dB over ``decay_time_s``.
    """
    if decay_time_s <= 0:
        raise ParameterError("decay time must be positive")
    rng = np.random.default_rng(seed)
    n = max(2, int(round(decay_time_s * sample_rate)))
    t = np.arange(n) / sample_rate
    env = 10.0 ** (-3.0 * t / decay_time_s)
    h = 0.4 * rng.standard_normal(n) * env
    h[0] = 1.0
    return Waveform(h, sample_rate)


# ---------------------------------------------------------------- SpecAugment


def sample_masks(num_frames: int, n_mels: int, policy: AugmentPolicy,
                 rng: np.random.Generator) -> list[tuple[str, int, int]]:
    """Draw ``(axis, start, width)`` stripes; widths uniform in [0, max], clipped to the axis."""
    masks = []
    for _ in range(policy.num_time_masks):
        w = int(rng.integers(0, min(policy.max_time_width, num_frames) + 1))
        masks.append(("time", int(rng.integers(0, num_frames - w + 1)), w))
    for _ in range(policy.num_freq_masks):
        w = int(rng.integers(0, min(policy.max_freq_width, n_mels) + 1))
        masks.append(("freq", int(rng.integers(0, n_mels - w + 1)), w))
    return masks


def spec_augment(feats: np.ndarray, policy: AugmentPolicy, seed, n_mels: int = 80) -> np.ndarray:
    """Fill random time and mel-channel stripes with the utterance's mean mel value.

    Only the first ``n_mels`` columns are touched; pitch columns pass through.
    """
    out = np.array(feats, dtype=np.float64, copy=True)
    if policy.num_time_masks == 0 and policy.num_freq_masks == 0:
        return out
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fill = feats[:, :n_mels].mean()
    for axis, start, width in sample_masks(out.shape[0], n_mels, policy, rng):
        if axis == "time":
            out[start : start + width, :n_mels] = fill
        else:
            out[:, start : start + width] = fill
    return out


# ---------------------------------------------------------------- manifest expansion

_VARIANT_RE = re.compile(r"^(?P<src>.+)#sp(?P<factor>[0-9.]+)#v(?P<seed>\d+)$")


def variant_seed(seed: int, utt_id: str, factor: float) -> int:
    digest = hashlib.sha256(f"{seed}|{utt_id}|{factor:g}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def variant_id(utt_id: str, factor: float, vseed: int) -> str:
    return f"{utt_id}#sp{factor:g}#v{vseed}"


def parse_variant_id(utt_id: str) -> tuple[str, float, int] | None:
    m = _VARIANT_RE.match(utt_id)
    if not m:
        return None
    return m.group("src"), float(m.group("factor")), int(m.group("seed"))


def expand_training_set(manifest: Manifest, policy: AugmentPolicy, seed: int) -> Manifest:
    """One record per (utterance, speed factor); label text is never altered.

    Volume/reverb choices are not stored: they are re-derived from the variant
    seed embedded in the id by :func:`realize_variant`.
    """
    out = []
    for r in manifest:
        for f in policy.speed_factors:
            vid = variant_id(r.utt_id, f, variant_seed(seed, r.utt_id, f))
            out.append(Utterance(vid, r.audio_path, r.speaker_id, r.subset, r.transcript))
    return Manifest(out)


def realize_variant(w: Waveform, record: Utterance, policy: AugmentPolicy) -> Waveform:
    """Apply the waveform-level augmentation encoded in an expanded record's id."""
    parsed = parse_variant_id(record.utt_id)
    if parsed is None:
        return w
    _, factor, vseed = parsed
    y = speed_perturb(w, factor)
    if record.subset not in policy.others_subsets:
        return y
    rng = np.random.default_rng(vseed)
    if policy.use_rir:
        pool = policy.pool(w.sample_rate)
        pick = int(rng.integers(0, len(pool)))
        if rng.random() < policy.rir_prob:
            y = apply_rir(y, pool[pick])
    if policy.use_volume:
        lo, hi = policy.volume_range_db
        y, _ = volume_perturb(y, float(rng.uniform(lo, hi)))
    return y
