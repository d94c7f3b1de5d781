"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - b|| / max(||a||, ||b||)``; 0 when both are (numerically) zero."""
    diff = float(np.linalg.norm(np.ravel(a) - np.ravel(b)))
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    if scale < floor:
        return diff
    return diff / scale


def numerical_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor], arrays: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    """Central differences of the scalar ``fn`` w.r.t. every entry of every array."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for i, base in enumerate(arrays):
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            fp = fn([Tensor(a) for a in arrays]).item()
            flat[j] = old - h
            fm = fn([Tensor(a) for a in arrays]).item()
            flat[j] = old
            gflat[j] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def analytic_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor], arrays: Sequence[np.ndarray]
) -> list[np.ndarray]:
    inputs = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = fn(inputs)
    tape.backward(out)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor], arrays: Sequence[np.ndarray], h: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Largest per-input relative error between tape and finite-difference gradients.

    Inputs whose true gradient is zero (e.g. an attention key bias, which the
    softmax cancels) yield pure rounding noise of order 1e-11 at ``h = 1e-5``;
    below ``floor`` the absolute difference is reported instead.
    """
    ana = analytic_gradients(fn, arrays)
    num = numerical_gradients(fn, arrays, h)
    return max(relative_error(a, n, floor) for a, n in zip(ana, num))
