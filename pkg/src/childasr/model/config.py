"""Model and training configuration records."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    input_dim: int = 83
    enc_layers: int = 2
    dec_layers: int = 2
    model_dim: int = 32
    ff_dim: int = 64
    heads: int = 4
    dropout: float = 0.1
    subsample_factor: int = 4

    def __post_init__(self):
        for key in ("vocab_size", "input_dim", "enc_layers", "dec_layers", "model_dim", "ff_dim", "heads"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.subsample_factor not in (1, 2, 4):
            raise ConfigError("subsample_factor must be 1, 2 or 4")

    @classmethod
    def preset(cls, name: str, vocab_size: int, input_dim: int = 83) -> "ModelConfig":
        if name == "desk":
            return cls(vocab_size=vocab_size, input_dim=input_dim)
        if name == "paper":
            return cls(vocab_size=vocab_size, input_dim=input_dim, enc_layers=12, dec_layers=6,
                       model_dim=320, ff_dim=2048, heads=4, dropout=0.1)
        raise ConfigError(f"unknown preset {name!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MtlConfig:
    ctc_weight: float = 0.3
    lr: float = 2e-3
    warmup_steps: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    label_smoothing: float = 0.0
    grad_clip: float = 5.0
    select_best: bool = True

    def __post_init__(self):
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ConfigError("ctc_weight must lie in [0, 1]")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")

    def lr_at(self, step: int) -> float:
        if self.warmup_steps and step < self.warmup_steps:
            return self.lr * (step + 1) / self.warmup_steps
        return self.lr
