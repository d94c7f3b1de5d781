# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the dynamic-programming kernels in ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, INFINITY

cnp.import_array()


cdef inline double lae(double a, double b) nogil:
    # log(exp(a) + exp(b)) with -inf as identity
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def ctc_alpha(double[:, ::1] log_probs, long[::1] ext, long blank):
    cdef Py_ssize_t T = log_probs.shape[0]
    cdef Py_ssize_t S = ext.shape[0]
    out = np.full((T, S), -np.inf)
    cdef double[:, ::1] a = out
    cdef Py_ssize_t t, s
    cdef double v
    if T == 0:
        return out
    with nogil:
        a[0, 0] = log_probs[0, ext[0]]
        if S > 1:
            a[0, 1] = log_probs[0, ext[1]]
        for t in range(1, T):
            for s in range(S):
                v = a[t - 1, s]
                if s >= 1:
                    v = lae(v, a[t - 1, s - 1])
                if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                    v = lae(v, a[t - 1, s - 2])
                if v != -INFINITY:
                    a[t, s] = v + log_probs[t, ext[s]]
    return out


def ctc_beta(double[:, ::1] log_probs, long[::1] ext, long blank):
    cdef Py_ssize_t T = log_probs.shape[0]
    cdef Py_ssize_t S = ext.shape[0]
    out = np.full((T, S), -np.inf)
    cdef double[:, ::1] b = out
    cdef Py_ssize_t t, s
    cdef double v
    if T == 0:
        return out
    with nogil:
        b[T - 1, S - 1] = 0.0
        if S > 1:
            b[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            for s in range(S):
                v = b[t + 1, s] + log_probs[t + 1, ext[s]]
                if s + 1 < S:
                    v = lae(v, b[t + 1, s + 1] + log_probs[t + 1, ext[s + 1]])
                if s + 2 < S and ext[s + 2] != blank and ext[s + 2] != ext[s]:
                    v = lae(v, b[t + 1, s + 2] + log_probs[t + 1, ext[s + 2]])
                b[t, s] = v
    return out


def ctc_prefix_extend(double[:, ::1] log_probs, double[:, ::1] r_prev, long last,
                      long[::1] cands, long blank, bint empty_prefix):
    cdef Py_ssize_t T = log_probs.shape[0]
    cdef Py_ssize_t C = cands.shape[0]
    r_out = np.full((T, 2, C), -np.inf)
    psi_out = np.full(C, -np.inf)
    cdef double[:, :, ::1] r = r_out
    cdef double[::1] psi = psi_out
    cdef Py_ssize_t t, j
    cdef long c
    cdef double phi, xc
    with nogil:
        for j in range(C):
            c = cands[j]
            if empty_prefix:
                r[0, 0, j] = log_probs[0, c]
            psi[j] = r[0, 0, j]
            for t in range(1, T):
                if c == last:
                    phi = r_prev[t - 1, 1]
                else:
                    phi = lae(r_prev[t - 1, 0], r_prev[t - 1, 1])
                xc = log_probs[t, c]
                r[t, 0, j] = lae(r[t - 1, 0, j], phi) + xc
                r[t, 1, j] = lae(r[t - 1, 0, j], r[t - 1, 1, j]) + log_probs[t, blank]
                psi[j] = lae(psi[j], phi + xc)
    return r_out, psi_out


def edit_table(long[::1] ref, long[::1] hyp):
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t m = hyp.shape[0]
    out = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef long[:, ::1] d = out
    cdef Py_ssize_t i, j
    cdef long best, v
    with nogil:
        for i in range(n + 1):
            d[i, 0] = i
        for j in range(m + 1):
            d[0, j] = j
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                best = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
                v = d[i - 1, j] + 1
                if v < best:
                    best = v
                v = d[i, j - 1] + 1
                if v < best:
                    best = v
                d[i, j] = best
    return out
