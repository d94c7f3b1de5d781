"""Named parameter collections, Adam, and the binary checkpoint format."""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import CheckpointError, TrainingError
from .tensor import Tensor

MAGIC = b"CHASRCKP"
FORMAT_VERSION = 1


class ModelParams:
    """Ordered name -> trainable :class:`Tensor` mapping."""

    def __init__(self, tensors: dict[str, Tensor] | None = None):
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, t in (tensors or {}).items():
            self.add(name, t)

    def add(self, name: str, value) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"duplicate parameter {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        t.name = name
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self) -> list[str]:
        return list(self._tensors)

    def group(self, prefix: str) -> dict[str, Tensor]:
        """Sub-dict of tensors under ``prefix.`` keyed by the remaining suffix."""
        p = prefix + "."
        return {k[len(p):]: v for k, v in self._tensors.items() if k.startswith(p)}

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams({k: Tensor(v.data.copy()) for k, v in self._tensors.items()})

    def num_elements(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, params: ModelParams, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self, lr: float | None = None) -> None:
        sgd_adam_step(self, lr if lr is not None else self.lr)


def sgd_adam_step(opt: Adam, lr: float) -> None:
    """Apply one in-place Adam update from the gradients stored on ``opt.params``."""
    for name, t in opt.params.items():
        if t.grad is None:
            raise TrainingError(f"parameter {name!r} has no gradient")
        if not np.all(np.isfinite(t.grad)):
            raise TrainingError(f"non-finite gradient in parameter {name!r}")
    opt.step_count += 1
    b1, b2 = opt.betas
    c1 = 1.0 - b1**opt.step_count
    c2 = 1.0 - b2**opt.step_count
    for name, t in opt.params.items():
        g = t.grad
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        t.data = t.data - lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


def clip_grad_norm(params: ModelParams, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((t.grad * t.grad).sum()) for _, t in params.items())))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for _, t in params.items():
            t.grad = t.grad * scale
    return total


# ---------------------------------------------------------------- checkpoints
#
# layout: MAGIC | u32 version | u32 count | count x record
# record: u32 name_len | utf-8 name | u32 rank | rank x u64 dim | <f8 payload


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")  # keeps 0-d shape; tobytes() is C order
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path: str | Path) -> "OrderedDict[str, np.ndarray]":
    buf = Path(path).read_bytes()
    if buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    pos = len(MAGIC)
    try:
        version, count = struct.unpack_from("<II", buf, pos)
        pos += 8
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        out: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", buf, pos)
            pos += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims)
            pos += 8 * size
            out[name] = arr.astype(np.float64)
    except CheckpointError:
        raise
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return out


def save_params(path: str | Path, params: ModelParams) -> None:
    save_tensors(path, {k: t.data for k, t in params.items()})


def load_params(path: str | Path) -> ModelParams:
    return ModelParams({k: Tensor(v) for k, v in load_tensors(path).items()})
