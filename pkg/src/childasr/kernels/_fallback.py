"""Pure numpy implementations of the dynamic-programming kernels.

Each function vectorises over the state axis and loops over time in Python.
The compiled module ``_ckernels`` exposes the same functions with the same
signatures and must agree with these to round-off.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def _skip_mask(ext: np.ndarray, blank: int) -> np.ndarray:
    skip = np.zeros(ext.shape[0], dtype=bool)
    if ext.shape[0] > 2:
        skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return skip


def ctc_alpha(log_probs: np.ndarray, ext: np.ndarray, blank: int) -> np.ndarray:
    """Forward variables: log mass of prefixes of paths ending in state s at frame t."""
    T = log_probs.shape[0]
    S = ext.shape[0]
    alpha = np.full((T, S), NEG_INF)
    if T == 0:
        return alpha
    emit = log_probs[:, ext]
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    skip = _skip_mask(ext, blank)
    prev2 = np.full(S, NEG_INF)
    for t in range(1, T):
        prev = alpha[t - 1]
        shifted1 = np.concatenate(([NEG_INF], prev[:-1]))
        prev2[:] = NEG_INF
        prev2[2:] = np.where(skip[2:], prev[:-2], NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(prev, shifted1), prev2) + emit[t]
    return alpha


def ctc_beta(log_probs: np.ndarray, ext: np.ndarray, blank: int) -> np.ndarray:
    """Backward variables, excluding the emission at frame t itself."""
    T = log_probs.shape[0]
    S = ext.shape[0]
    beta = np.full((T, S), NEG_INF)
    if T == 0:
        return beta
    emit = log_probs[:, ext]
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    skip = _skip_mask(ext, blank)
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        jump = np.full(S, NEG_INF)
        jump[:-2] = np.where(skip[2:], nxt[2:], NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), jump)
    return beta


def ctc_prefix_extend(
    log_probs: np.ndarray,
    r_prev: np.ndarray,
    last: int,
    cands: np.ndarray,
    blank: int,
    empty_prefix: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Extend one prefix by each candidate label.

    ``r_prev`` is (T, 2): log forward mass of the prefix ending at frame t in a
    label (column 0) or in blank (column 1).  Returns ``r_new`` of shape
    (T, 2, C) and the prefix log-probabilities ``psi`` of shape (C,).
    """
    T = log_probs.shape[0]
    C = cands.shape[0]
    r = np.full((T, 2, C), NEG_INF)
    xs = log_probs[:, cands]
    xb = log_probs[:, blank]
    if empty_prefix:
        r[0, 0] = xs[0]
    r_sum = np.logaddexp(r_prev[:, 0], r_prev[:, 1])
    phi = np.repeat(r_sum[:, None], C, axis=1)
    same = cands == last
    if np.any(same):
        phi[:, same] = r_prev[:, 1:2]
    psi = r[0, 0].copy()
    for t in range(1, T):
        r[t, 0] = np.logaddexp(r[t - 1, 0], phi[t - 1]) + xs[t]
        r[t, 1] = np.logaddexp(r[t - 1, 0], r[t - 1, 1]) + xb[t]
        psi = np.logaddexp(psi, phi[t - 1] + xs[t])
    return r, psi


def edit_table(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    """Unit-cost Levenshtein DP table of shape (len(ref)+1, len(hyp)+1)."""
    n, m = ref.shape[0], hyp.shape[0]
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        sub = d[i - 1, :-1] + (ref[i - 1] != hyp)
        row = np.minimum(sub, d[i - 1, 1:] + 1)
        # insertion chain along the row is sequential
        cur = d[i]
        cur[0] = i
        for j in range(1, m + 1):
            v = row[j - 1]
            w = cur[j - 1] + 1
            cur[j] = v if v < w else w
    return d
