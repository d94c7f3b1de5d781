"""Log-mel filterbank and autocorrelation pitch features."""

from __future__ import annotations

import numpy as np

from ..audio import Waveform
from ..errors import FeatureError

LOG_FLOOR = 1e-10
PREEMPH = 0.97
PITCH_FMIN = 60.0
PITCH_FMAX = 400.0
VOICING_THRESHOLD = 0.35
OCTAVE_RATIO = 0.95


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def num_frames(n_samples: int, win: int, hop: int) -> int:
    if n_samples < win:
        return 0
    return 1 + (n_samples - win) // hop


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    T = num_frames(x.shape[0], win, hop)
    if T == 0:
        raise FeatureError(f"waveform of {x.shape[0]} samples is shorter than one {win}-sample window")
    return np.lib.stride_tricks.as_strided(
        x, shape=(T, win), strides=(hop * x.strides[0], x.strides[0]), writeable=False
    ).copy()


def _sizes(sample_rate: int, win_s: float, hop_s: float) -> tuple[int, int]:
    return int(round(win_s * sample_rate)), int(round(hop_s * sample_rate))


def fft_size(win: int) -> int:
    return 1 << int(np.ceil(np.log2(win)))


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """(n_mels, n_fft//2 + 1) triangular filters, linear in the mel domain."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    bin_mel = hz_to_mel(np.arange(n_fft // 2 + 1) * sample_rate / n_fft)
    lo, ce, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mel[None, :] - lo) / (ce - lo)
    down = (hi - bin_mel[None, :]) / (hi - ce)
    return np.maximum(0.0, np.minimum(up, down))


def mel_center_frequencies(n_mels: int, sample_rate: int,
                           fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    return mel_to_hz(edges[1:-1])


def logmel_fbank(w: Waveform, n_mels: int = 80, win: float = 0.025, hop: float = 0.010) -> np.ndarray:
    """T x n_mels natural-log mel energies, T = 1 + (N - win) // hop."""
    wl, hl = _sizes(w.sample_rate, win, hop)
    frames = frame_signal(w.samples, wl, hl)
    emph = frames.copy()
    emph[:, 1:] -= PREEMPH * frames[:, :-1]
    emph[:, 0] -= PREEMPH * frames[:, 0]
    n_fft = fft_size(wl)
    spec = np.abs(np.fft.rfft(emph * np.hanning(wl), n=n_fft, axis=1))
    fb = mel_filterbank(n_mels, n_fft, w.sample_rate)
    return np.log(np.maximum(spec @ fb.T, LOG_FLOOR))


def frame_pitch(w: Waveform, win: float = 0.025, hop: float = 0.010,
                fmin: float = PITCH_FMIN, fmax: float = PITCH_FMAX) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (voicing confidence, F0 in Hz) from the normalised cross-correlation.

    ``r(lag) = sum x[n] x[n+lag] / sqrt(sum x[n]^2 * sum x[n+lag]^2)`` over the
    overlapping part of the frame, so a periodic frame scores ~1 at its period.
    The chosen lag is the shortest one within ``OCTAVE_RATIO`` of the band
    maximum (climbed to its local peak), refined by parabolic interpolation;
    the confidence is ``r`` at that lag.
    """
    sr = w.sample_rate
    wl, hl = _sizes(sr, win, hop)
    frames = frame_signal(w.samples, wl, hl)
    frames = frames - frames.mean(axis=1, keepdims=True)
    n_fft = fft_size(2 * wl)
    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n=n_fft, axis=1)[:, :wl]
    sq = np.cumsum(frames * frames, axis=1)
    total = sq[:, -1:]
    lags = np.arange(wl)
    head = sq[:, wl - 1 - lags]  # energy of x[0 .. wl-1-lag]
    tail = total - np.concatenate([np.zeros((frames.shape[0], 1)), sq[:, :-1]], axis=1)  # x[lag ..]
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    floor = 1e-20 * np.maximum(total, 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > floor, acf / np.where(denom > floor, denom, 1.0), 0.0)
    lo = int(np.ceil(sr / fmax))
    hi = min(int(np.floor(sr / fmin)), wl - 2)
    band = r[:, lo : hi + 1]
    # multiples of the period also score ~1: take the first lag near the best, then its local peak
    first = np.argmax(band >= OCTAVE_RATIO * band.max(axis=1, keepdims=True), axis=1)
    k = first + lo
    rows = np.arange(r.shape[0])
    for i in rows:
        while k[i] < hi and r[i, k[i] + 1] > r[i, k[i]]:
            k[i] += 1
    peak = r[rows, k]
    left = r[rows, k - 1]
    right = r[rows, k + 1]
    curv = left - 2.0 * peak + right
    with np.errstate(invalid="ignore", divide="ignore"):
        shift = np.where(np.abs(curv) > 1e-12, 0.5 * (left - right) / curv, 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    f0 = sr / (k + shift)
    return np.clip(peak, 0.0, 1.0), f0


def pitch_features(w: Waveform, hop: float = 0.010, win: float = 0.025) -> np.ndarray:
    """T x 3: voicing confidence, mean-normalised log-F0, delta log-F0.

    Frames below the voicing threshold take log-F0 linearly interpolated from
    the voiced frames around them (held constant past the ends).
    """
    conf, f0 = frame_pitch(w, win=win, hop=hop)
    logf0 = np.log(f0)
    voiced = conf >= VOICING_THRESHOLD
    t = np.arange(conf.shape[0])
    if voiced.any():
        logf0 = np.interp(t, t[voiced], logf0[voiced])
    else:
        logf0 = np.full(conf.shape[0], 0.5 * (np.log(PITCH_FMIN) + np.log(PITCH_FMAX)))
    norm = logf0 - logf0.mean()
    delta = np.zeros_like(norm)
    if norm.shape[0] > 2:
        delta[1:-1] = 0.5 * (norm[2:] - norm[:-2])
    if norm.shape[0] > 1:
        delta[0] = norm[1] - norm[0]
        delta[-1] = norm[-1] - norm[-2]
    return np.stack([conf, norm, delta], axis=1)


def extract_features(w: Waveform, n_mels: int = 80) -> np.ndarray:
    """T x (n_mels + 3) feature matrix: log-mel filterbank followed by pitch."""
    return np.concatenate([logmel_fbank(w, n_mels=n_mels), pitch_features(w)], axis=1)


def cmvn(feats: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Per-utterance mean/variance normalisation of every column."""
    mu = feats.mean(axis=0, keepdims=True)
    sd = feats.std(axis=0, keepdims=True)
    return (feats - mu) / (sd + eps)
