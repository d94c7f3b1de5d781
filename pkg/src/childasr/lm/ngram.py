"""Witten-Bell interpolated n-gram models in ARPA backoff form, perplexity,
and linear interpolation with grid-searched weights."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import ParseError

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
NO_PROB = -99.0
LN10 = math.log(10.0)


@dataclass
class NGramModel:
    """Backoff tables: ``probs[k-1][gram]`` is log10 P, ``bows[k-1][gram]`` log10 backoff."""

    order: int
    probs: list[dict[tuple[str, ...], float]]
    bows: list[dict[tuple[str, ...], float]]

    @property
    def vocab(self) -> list[str]:
        return sorted(g[0] for g in self.probs[0])

    def predictable(self) -> list[str]:
        """Tokens that can follow a history (everything but the sentence start)."""
        return [w for w in self.vocab if w != BOS]

    def map_token(self, w: str) -> str:
        return w if (w,) in self.probs[0] else UNK

    def logprob10(self, word: str, history: Sequence[str] = ()) -> float:
        word = self.map_token(word)
        hist = tuple(self.map_token(h) for h in history)[max(0, len(history) - self.order + 1):]
        acc = 0.0
        while True:
            gram = hist + (word,)
            p = self.probs[len(gram) - 1].get(gram)
            if p is not None:
                return acc + p
            if not hist:
                return acc + NO_PROB
            acc += self.bows[len(hist) - 1].get(hist, 0.0)
            hist = hist[1:]

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        """Natural-log conditional probability."""
        return self.logprob10(word, history) * LN10

    def token_logprobs(self, sentence: Sequence[str]) -> np.ndarray:
        """Natural-log probability of each token and of the sentence end."""
        hist = [BOS]
        out = []
        for w in list(sentence) + [EOS]:
            out.append(self.logprob(w, hist))
            hist.append(w)
        return np.array(out)


def _counts(sentences: Iterable[Sequence[str]], order: int, known: set[str] | None):
    counts = [defaultdict(int) for _ in range(order)]
    n_sent = 0
    for s in sentences:
        n_sent += 1
        toks = [BOS] + [w if known is None or w in known else UNK for w in s] + [EOS]
        for i in range(1, len(toks)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                counts[k - 1][tuple(toks[i - k + 1 : i + 1])] += 1
    return counts, n_sent


def train_ngram(sentences: Iterable[Sequence[str]], order: int = 4,
                vocab: Sequence[str] | None = None) -> NGramModel:
    """Witten-Bell interpolated estimates stored as ARPA probabilities and backoffs.

    ``P(w|h) = (c(h,w) + N1+(h.) P(w|h')) / (c(h) + N1+(h.))`` with the
    unigram level interpolated with a uniform distribution over the vocabulary,
    ``</s>`` and ``<unk>``.  ``vocab`` (if given) fixes the unigram support;
    other tokens are mapped to ``<unk>``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    known = set(vocab) if vocab is not None else None
    counts, n_sent = _counts(sentences, order, known)
    if n_sent == 0:
        raise ValueError("cannot train an n-gram model on an empty corpus")
    support = set(known) if known is not None else {g[0] for g in counts[0]}
    support |= {EOS, UNK}
    support.discard(BOS)

    # context statistics: c(h) and N1+(h .)
    ctx_total = [defaultdict(int) for _ in range(order)]
    ctx_types = [defaultdict(int) for _ in range(order)]
    for k in range(order):
        for gram, c in counts[k].items():
            ctx_total[k][gram[:-1]] += c
            ctx_types[k][gram[:-1]] += 1

    probs: list[dict] = [dict() for _ in range(order)]
    bows: list[dict] = [dict() for _ in range(order)]
    tot, typ = ctx_total[0][()], ctx_types[0][()]
    uni = {}
    for w in support:
        uni[w] = (counts[0].get((w,), 0) + typ / len(support)) / (tot + typ)
    for w, p in uni.items():
        probs[0][(w,)] = math.log10(p)
    probs[0][(BOS,)] = NO_PROB

    # linear-domain lookup of the interpolated lower-order estimate
    lin = [dict() for _ in range(order)]
    lin[0] = dict(((w,), p) for w, p in uni.items())

    def lower(gram: tuple[str, ...]) -> float:
        k = len(gram)
        if k == 1:
            return lin[0][gram]
        if gram in lin[k - 1]:
            return lin[k - 1][gram]
        h = gram[:-1]
        if ctx_total[k - 1].get(h):
            lam = ctx_types[k - 1][h] / (ctx_total[k - 1][h] + ctx_types[k - 1][h])
            return lam * lower(gram[1:])
        return lower(gram[1:])

    for k in range(2, order + 1):
        for gram in sorted(counts[k - 1]):
            h = gram[:-1]
            c_h, n_h = ctx_total[k - 1][h], ctx_types[k - 1][h]
            p = (counts[k - 1][gram] + n_h * lower(gram[1:])) / (c_h + n_h)
            lin[k - 1][gram] = p
            probs[k - 1][gram] = math.log10(p)
    for k in range(2, order + 1):
        for h, c_h in ctx_total[k - 1].items():
            n_h = ctx_types[k - 1][h]
            bows[k - 2][h] = math.log10(n_h / (c_h + n_h))
    return NGramModel(order, probs, bows)


# ---------------------------------------------------------------- perplexity


def perplexity(lm, sentences: Iterable[Sequence[str]]) -> float:
    """``exp(-mean log P)`` over every token and sentence end (the start is not scored)."""
    total = 0.0
    n = 0
    for s in sentences:
        lp = lm.token_logprobs(s)
        total += float(lp.sum())
        n += lp.shape[0]
    if n == 0:
        raise ValueError("perplexity of an empty corpus")
    return math.exp(-total / n)


@dataclass
class InterpolatedLM:
    components: list
    weights: np.ndarray
    grid: list[tuple[tuple[float, ...], float]] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.components):
            raise ValueError("one weight per component required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("interpolation weights must lie on the simplex")
        vocabs = {tuple(c.vocab) for c in self.components}
        if len(vocabs) != 1:
            raise ValueError("interpolated components must share one vocabulary")

    @property
    def order(self) -> int:
        return max(c.order for c in self.components)

    @property
    def vocab(self) -> list[str]:
        return self.components[0].vocab

    def predictable(self) -> list[str]:
        return self.components[0].predictable()

    def prob(self, word: str, history: Sequence[str] = ()) -> float:
        return float(sum(w * math.exp(c.logprob(word, history))
                         for w, c in zip(self.weights, self.components)))

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        p = self.prob(word, history)
        return math.log(p) if p > 0 else -math.inf

    def token_logprobs(self, sentence: Sequence[str]) -> np.ndarray:
        lp = np.stack([c.token_logprobs(sentence) for c in self.components], axis=1)
        with np.errstate(divide="ignore"):
            return np.log(np.exp(lp) @ self.weights)


def simplex_grid(m: int, step: float) -> list[tuple[float, ...]]:
    """Every weight vector with entries in multiples of ``step`` summing to one (vertices included)."""
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError("grid step must divide 1")
    out = []
    for cut in itertools.combinations(range(n + m - 1), m - 1):
        parts, prev = [], -1
        for c in cut + (n + m - 1,):
            parts.append(c - prev - 1)
            prev = c
        out.append(tuple(p / n for p in parts))
    return out


def interpolate(components: Sequence, dev: Sequence[Sequence[str]], grid_step: float = 0.05) -> InterpolatedLM:
    """Grid search over the simplex for the weights minimising dev perplexity."""
    components = list(components)
    if len(components) < 2:
        raise ValueError("interpolation needs at least two components")
    if len({tuple(c.vocab) for c in components}) != 1:
        raise ValueError("interpolated components must share one vocabulary")
    probs = np.concatenate([
        np.exp(np.stack([c.token_logprobs(s) for c in components], axis=1)) for s in dev
    ])
    results = []
    best = None
    for w in simplex_grid(len(components), grid_step):
        with np.errstate(divide="ignore"):
            ppl = float(np.exp(-np.mean(np.log(probs @ np.array(w)))))
        results.append((w, ppl))
        if best is None or ppl < best[1]:
            best = (w, ppl)
    return InterpolatedLM(components, np.array(best[0]), results)


# ---------------------------------------------------------------- ARPA


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_arpa(lm: NGramModel, path: str | Path) -> None:
    lines = ["\\data\\"]
    for k in range(1, lm.order + 1):
        lines.append(f"ngram {k}={len(lm.probs[k - 1])}")
    for k in range(1, lm.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for gram in sorted(lm.probs[k - 1]):
            row = f"{_fmt(lm.probs[k - 1][gram])}\t{' '.join(gram)}"
            if k < lm.order and gram in lm.bows[k - 1]:
                row += f"\t{_fmt(lm.bows[k - 1][gram])}"
            lines.append(row)
    lines.append("")
    lines.append("\\end\\")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_arpa(path: str | Path) -> NGramModel:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    lines = [(n + 1, line.strip()) for n, line in enumerate(raw)]
    lines = [(n, s) for n, s in lines if s]
    if not lines or lines[0][1] != "\\data\\":
        raise ParseError(f"{path}:{lines[0][0] if lines else 1}: expected \\data\\ header")
    declared: dict[int, int] = {}
    i = 1
    while i < len(lines) and lines[i][1].startswith("ngram "):
        n, s = lines[i]
        try:
            k, c = s[len("ngram "):].split("=")
            declared[int(k)] = int(c)
        except ValueError as exc:
            raise ParseError(f"{path}:{n}: malformed count line {s!r}") from exc
        i += 1
    if not declared or sorted(declared) != list(range(1, len(declared) + 1)):
        raise ParseError(f"{path}: n-gram counts must cover orders 1..n")
    order = len(declared)
    probs: list[dict] = [dict() for _ in range(order)]
    bows: list[dict] = [dict() for _ in range(order)]
    for k in range(1, order + 1):
        if i >= len(lines) or lines[i][1] != f"\\{k}-grams:":
            where = lines[i][0] if i < len(lines) else len(raw)
            raise ParseError(f"{path}:{where}: expected \\{k}-grams: section header")
        i += 1
        while i < len(lines) and not lines[i][1].startswith("\\"):
            n, s = lines[i]
            parts = s.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(f"{path}:{n}: expected logprob, gram[, backoff]")
            gram = tuple(parts[1].split(" "))
            if len(gram) != k:
                raise ParseError(f"{path}:{n}: {k}-gram section holds a {len(gram)}-gram")
            try:
                probs[k - 1][gram] = float(parts[0])
                if len(parts) == 3:
                    bows[k - 1][gram] = float(parts[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{n}: non-numeric field") from exc
            i += 1
        if len(probs[k - 1]) != declared[k]:
            raise ParseError(
                f"{path}: order {k} declares {declared[k]} n-grams but lists {len(probs[k - 1])}"
            )
    if i >= len(lines) or lines[i][1] != "\\end\\":
        raise ParseError(f"{path}:{lines[i][0] if i < len(lines) else len(raw)}: expected \\end\\")
    return NGramModel(order, probs, bows)
