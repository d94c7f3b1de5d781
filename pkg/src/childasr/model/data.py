"""Turning manifests into feature matrices and target id sequences."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio import read_audio
from ..augment import AugmentPolicy, expand_training_set, realize_variant
from ..frontend.features import cmvn, extract_features
from ..numcore import load_tensors, save_tensors
from ..textnorm import Manifest, Utterance, Vocabulary, tokenize_chars


@dataclass
class Example:
    utt_id: str
    feats: np.ndarray
    targets: list[int]
    speaker_id: str
    subset: str
    transcript: str


def features_for(record: Utterance, root: str | Path, policy: AugmentPolicy | None = None) -> np.ndarray:
    w = read_audio(Path(root) / record.audio_path)
    if policy is not None:
        w = realize_variant(w, record, policy)
    return cmvn(extract_features(w))


def _job(args):
    record, root, policy = args
    return features_for(record, root, policy)


def load_examples(
    manifest: Manifest,
    root: str | Path,
    vocab: Vocabulary,
    policy: AugmentPolicy | None = None,
    seed: int = 0,
    workers: int = 1,
) -> list[Example]:
    """Feature + target pairs in manifest order.

    With a policy the manifest is first expanded into its speed variants and
    each variant's waveform augmentation is realised before feature extraction.
    """
    if policy is not None:
        manifest = expand_training_set(manifest, policy, seed)
    jobs = [(r, str(root), policy) for r in manifest]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            feats = list(ex.map(_job, jobs, chunksize=8))
    else:
        feats = [_job(j) for j in jobs]
    return [
        Example(r.utt_id, f, tokenize_chars(r.transcript, vocab), r.speaker_id, r.subset, r.transcript)
        for r, f in zip(manifest, feats)
    ]


def save_feature_cache(path: str | Path, examples: list[Example]) -> None:
    save_tensors(path, {e.utt_id: e.feats for e in examples})


def load_feature_cache(path: str | Path, manifest: Manifest, vocab: Vocabulary) -> list[Example]:
    table = load_tensors(path)
    return [
        Example(r.utt_id, table[r.utt_id], tokenize_chars(r.transcript, vocab), r.speaker_id,
                r.subset, r.transcript)
        for r in manifest
    ]
