"""Synthetic corpus generation and acoustic features."""

from .corpus import CorpusConfig, SubsetConfig, generate_corpus, generate_sentence, stable_seed
from .features import (
    cmvn,
    extract_features,
    frame_pitch,
    hz_to_mel,
    logmel_fbank,
    mel_center_frequencies,
    mel_filterbank,
    mel_to_hz,
    pitch_features,
)
from .synth import CHARACTERS, SpeakerProfile, SynthesisSpec, TokenRecipe, default_recipes, synthesize_utterance

__all__ = [
    "CHARACTERS", "CorpusConfig", "SpeakerProfile", "SubsetConfig", "SynthesisSpec", "TokenRecipe",
    "cmvn", "default_recipes", "extract_features", "frame_pitch", "generate_corpus",
    "generate_sentence", "hz_to_mel", "logmel_fbank", "mel_center_frequencies", "mel_filterbank",
    "mel_to_hz", "pitch_features", "stable_seed", "synthesize_utterance",
]
