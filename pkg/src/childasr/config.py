"""Plain-text ``key = value`` pipeline configuration.

Every key has a typed default; unknown keys and unparsable values are
rejected with the key name.  The resolved configuration renders back to the
same text format so runs can log exactly what they used.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from .errors import ConfigError

# key -> default; the default's type decides how values are parsed
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "preset": "desk",
    "work_dir": "work",
    # synthetic corpus
    "corpus.A.speakers": 40,
    "corpus.A.utts": 20,
    "corpus.C1.speakers": 20,
    "corpus.C1.utts": 16,
    "corpus.C2.speakers": 12,
    "corpus.C2.utts": 12,
    "corpus.arabic_digit_prob": 0.3,
    "corpus.punctuation_prob": 0.5,
    # partitioning
    "partition.ratios": (0.81, 0.09, 0.10),
    # acoustic model
    "model.enc_layers": 2,
    "model.dec_layers": 2,
    "model.model_dim": 32,
    "model.ff_dim": 64,
    "model.heads": 4,
    "model.dropout": 0.1,
    "model.subsample_factor": 4,
    "train.epochs": 12,
    "train.lr": 2e-3,
    "train.batch_size": 16,
    "train.ctc_weight": 0.3,
    "train.label_smoothing": 0.0,
    "train.warmup_steps": 0,
    "train.grad_clip": 5.0,
    "train.select_best": True,
    "child.epochs": 30,
    "child.lr": 1e-3,
    # augmentation
    "augment.speed_factors": (0.9, 1.0, 1.1),
    "augment.volume_db": (-6.0, 6.0),
    "augment.rir_decays": (0.15, 0.25, 0.4),
    "augment.rir_prob": 0.5,
    "augment.others_subsets": ("C1", "C2"),
    # masking is off by default: it slowed the desk-scale model enough to cost CER
    "augment.time_masks": 0,
    "augment.max_time_width": 20,
    "augment.freq_masks": 0,
    "augment.max_freq_width": 10,
    # language models
    "lm.order": 4,
    "lm.grid_step": 0.05,
    "rnnlm.embed_dim": 32,
    "rnnlm.hidden": 32,
    "rnnlm.layers": 2,
    "rnnlm.epochs": 10,
    "rnnlm.lr": 5e-3,
    # decoding and scoring
    "decode.beam_width": 8,
    "decode.nbest": 8,
    "decode.ctc_weight": 0.3,
    "decode.lm_weight": 0.3,
    "decode.max_len_ratio": 1.0,
    "rescore.weight": 0.5,
    "score.exclude_unk": False,
}


def _parse(key: str, text: str, default: Any) -> Any:
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            kind = type(default[0]) if default else str
            return tuple(kind(t) for t in items)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from exc


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


class PipelineConfig:
    def __init__(self, values: dict[str, Any] | None = None):
        self.values = dict(DEFAULTS)
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value: Any) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"{key}: unknown configuration key")
        if isinstance(value, str) and not isinstance(DEFAULTS[key], str):
            value = _parse(key, value, DEFAULTS[key])
        self.values[key] = value

    def __getitem__(self, key: str) -> Any:
        if key not in self.values:
            raise ConfigError(f"{key}: unknown configuration key")
        return self.values[key]

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "PipelineConfig":
        cfg = cls()
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"{key}: unknown configuration key ({source}:{n})")
            cfg.set(key, value)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        return cls.from_text(p.read_text(encoding="utf-8"), str(p))

    def render(self) -> str:
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in DEFAULTS)

    def stage_seed(self, stage: str) -> int:
        """Per-stage seed derived from the master seed and the stage name."""
        digest = hashlib.sha256(f"{self['seed']}|{stage}".encode()).digest()
        return int.from_bytes(digest[:4], "little")
