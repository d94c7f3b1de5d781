"""Independent brute-force oracles shared by unit and acceptance tests."""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


def collapse(path, blank=0):
    out, prev = [], None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def path_table(log_probs, blank=0) -> dict[tuple, float]:
    """log P(y) for every labelling reachable on the grid, by enumerating all paths."""
    T, K1 = log_probs.shape
    acc: dict[tuple, list[float]] = {}
    for path in itertools.product(range(K1), repeat=T):
        lp = float(sum(log_probs[t, k] for t, k in enumerate(path)))
        acc.setdefault(collapse(path, blank), []).append(lp)
    return {y: float(np.logaddexp.reduce(v)) for y, v in acc.items()}


def ctc_brute(log_probs, y, blank=0) -> float:
    return path_table(log_probs, blank).get(tuple(y), -np.inf)


def random_grid(rng, T, K):
    z = rng.normal(size=(T, K + 1)) * 2.0
    return z - np.logaddexp.reduce(z, axis=1, keepdims=True)


def edit_recursive(a, b) -> int:
    """Levenshtein distance straight from the recursive definition."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))
