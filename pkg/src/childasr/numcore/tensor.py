"""Dense float64 tensors with a reverse-mode autodiff tape.

Operations record themselves on the active :class:`Tape` (if any) when at
least one operand requires gradients.  Outside a tape every op is a plain
numpy computation, which is what evaluation code relies on.
"""

from __future__ import annotations

import contextvars
from typing import Callable, Sequence

import numpy as np

from ..errors import DegenerateInputError, DimensionError

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "childasr_active_tape", default=None
)


class Tensor:
    """A float64 array plus an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], backward: Callable):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of executed ops; replayed once, in reverse, by :meth:`backward`.

    Use as a context manager.  A tape belongs to one training step and must not
    be shared between threads (activation is tracked per context).
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._token = None
        self._consumed = False

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, out: Tensor, parents: Sequence[Tensor], backward: Callable) -> None:
        out.requires_grad = True
        self.nodes.append(_Node(out, tuple(parents), backward))

    def backward(self, loss: Tensor, seed: np.ndarray | None = None) -> None:
        if self._consumed:
            raise RuntimeError("tape has already been replayed")
        self._consumed = True
        if seed is None:
            if loss.data.size != 1:
                raise DimensionError("backward() without a seed needs a scalar loss")
            seed = np.ones_like(loss.data)
        _accumulate(loss, np.asarray(seed, dtype=np.float64))
        for node in reversed(self.nodes):
            g = node.out.grad
            if g is None:
                continue
            grads = node.backward(g)
            for parent, gp in zip(node.parents, grads):
                if gp is not None and parent.requires_grad:
                    _accumulate(parent, gp)
        self.nodes = []


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # never mutate in place: backward closures may hand the same array to two parents
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.shape)
    else:
        t.grad = t.grad + g


def _record(out: Tensor, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(p.requires_grad for p in parents):
        tape.record(out, parents, backward)
    return out


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data)

    def backward(g):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _record(out, (a, b), backward)


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data))
    return _record(out, (x,), lambda g: (g * out.data,))


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data))
    return _record(out, (x,), lambda g: (g / x.data,))


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    return _record(out, (x,), lambda g: (g * (1.0 - out.data * out.data),))


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    # split by sign so neither branch overflows
    e = np.exp(-np.abs(d))
    s = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = Tensor(s)
    return _record(out, (x,), lambda g: (g * s * (1.0 - s),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0))
    return _record(out, (x,), lambda g: (g * mask,))


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    out = Tensor(np.where(mask, value, x.data))
    return _record(out, (x,), lambda g: (np.where(mask, 0.0, g),))


# ---------------------------------------------------------------- shape ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = Tensor(np.matmul(a.data, b.data))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _record(out, (a, b), backward)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    return _record(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.transpose(x.data, axes))
    return _record(out, (x,), lambda g: (np.transpose(g, inverse),))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(x: Tensor, idx) -> Tensor:
    out = Tensor(x.data[idx])
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _record(out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record(out, tensors, backward)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _record(out, (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------- normalisers


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    d = x.data
    m = d.max(axis=axis, keepdims=True)
    if np.any(np.isneginf(m)):
        raise DegenerateInputError("softmax over a slice that is entirely -inf")
    e = np.exp(d - m)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _record(out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    d = x.data
    m = d.max(axis=axis, keepdims=True)
    if np.any(np.isneginf(m)):
        raise DegenerateInputError("log_softmax over a slice that is entirely -inf")
    shifted = d - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor(y)

    def backward(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return _record(out, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    d = x.data
    mu = d.mean(axis=-1, keepdims=True)
    xc = d - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gamma.data + beta.data)

    def backward(g):
        gx_hat = g * gamma.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, unbroadcast(g * xhat, gamma.shape), unbroadcast(g, beta.shape)

    return _record(out, (x, gamma, beta), backward)


def cross_entropy(
    logits: Tensor,
    targets,
    ignore_id: int = -1,
    reduction: str = "mean",
    label_smoothing: float = 0.0,
) -> Tensor:
    """Mean (or sum) over non-ignored positions of ``-log softmax(logits)[target]``.

    With ``label_smoothing`` ``eps`` the target distribution puts ``1 - eps`` on
    the label and spreads ``eps`` uniformly over all classes.
    """
    targets = np.asarray(targets, dtype=np.int64)
    V = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"targets {targets.shape} do not match logits {logits.shape}")
    valid = targets != ignore_id
    count = int(valid.sum())
    if count == 0:
        raise DegenerateInputError("cross_entropy: every position is ignored")
    if np.any(targets[valid] >= V) or np.any(targets[valid] < 0):
        raise DimensionError(f"target id out of range for {V} classes")
    d = logits.data
    m = d.max(axis=-1, keepdims=True)
    shifted = d - m
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    safe = np.where(valid, targets, 0)
    q = np.zeros_like(d)
    np.put_along_axis(q, safe[..., None], 1.0, axis=-1)
    if label_smoothing:
        q = (1.0 - label_smoothing) * q + label_smoothing / V
    q *= valid[..., None]
    total = -(q * logp).sum()
    scale = 1.0 / count if reduction == "mean" else 1.0
    out = Tensor(total * scale)

    def backward(g):
        p = np.exp(logp)
        return (g * scale * (p * valid[..., None] - q),)

    return _record(out, (logits,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep)
    return _record(out, (x,), lambda g: (g * keep,))


def embedding(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(f"embedding id out of range for table of {table.shape[0]} rows")
    out = Tensor(table.data[ids])

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _record(out, (table,), backward)


def custom_op(
    inputs: Sequence[Tensor], value: np.ndarray, backward: Callable[[np.ndarray], tuple]
) -> Tensor:
    """Wrap an externally computed value + vector-Jacobian product as a tape op."""
    out = Tensor(value)
    return _record(out, tuple(inputs), backward)
