import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from childasr.frontend import CorpusConfig, SubsetConfig, generate_corpus  # noqa: E402
from childasr.model import ModelConfig, load_examples  # noqa: E402
from childasr.textnorm import Manifest, Utterance, build_vocab, normalize_transcript  # noqa: E402


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A few speakers per subset; normalised manifest, vocabulary and features."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    cfg = CorpusConfig(subsets={"A": SubsetConfig(4, 6), "C1": SubsetConfig(3, 5), "C2": SubsetConfig(3, 4)},
                       seed=11)
    raw = generate_corpus(cfg, root)
    m = Manifest([Utterance(r.utt_id, r.audio_path, r.speaker_id, r.subset, normalize_transcript(r.transcript))
                  for r in raw])
    vocab = build_vocab([m])
    examples = load_examples(m, root, vocab)
    return {"root": Path(root), "manifest": m, "vocab": vocab, "examples": examples,
            "model_cfg": ModelConfig(vocab_size=len(vocab), dropout=0.0)}


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
