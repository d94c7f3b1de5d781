"""Waveform container and the raw-float64 + sidecar-header audio format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def header_path(path: str | Path) -> Path:
    return Path(str(path) + ".hdr")


def write_audio(path: str | Path, w: Waveform) -> None:
    """Headerless little-endian float64 samples plus ``<path>.hdr``."""
    Path(path).write_bytes(np.ascontiguousarray(w.samples, dtype="<f8").tobytes())
    header_path(path).write_text(f"sample_rate={w.sample_rate}\nnum_samples={len(w)}\n")


def read_audio(path: str | Path) -> Waveform:
    fields = {}
    for line in header_path(path).read_text().splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        fields[key] = value
    try:
        sr = int(fields["sample_rate"])
        n = int(fields["num_samples"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{header_path(path)}: malformed audio header") from exc
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    if data.shape[0] != n:
        raise ParseError(f"{path}: header says {n} samples, file holds {data.shape[0]}")
    return Waveform(data.astype(np.float64), sr)
