"""Joint CTC/attention Transformer: configuration, forward passes, training."""

from .config import ModelConfig, MtlConfig
from .data import Example, load_examples, load_feature_cache, save_feature_cache
from .train import EpochRecord, TrainResult, evaluate, train, transfer_learn
from .transformer import (
    attention_loss,
    batch_losses,
    ctc_logits,
    decode_step_logits,
    encode,
    init_params,
    log_posteriors,
    mtl_combine,
    mtl_loss,
    pad_batch,
)

__all__ = [
    "EpochRecord", "Example", "ModelConfig", "MtlConfig", "TrainResult", "attention_loss",
    "batch_losses", "ctc_logits", "decode_step_logits", "encode", "evaluate", "init_params",
    "load_examples", "load_feature_cache", "log_posteriors", "mtl_combine", "mtl_loss", "pad_batch",
    "save_feature_cache", "train", "transfer_learn",
]
