"""Float64 tensors, tape autodiff, layer primitives and the Adam optimiser."""

from .gradcheck import check_gradients, numerical_gradients, relative_error
from .nn import (
    causal_mask,
    dropout,
    embedding_lookup,
    layer_norm,
    linear,
    lstm_step,
    multi_head_attention,
    padding_mask,
    positional_encoding,
    relu,
)
from .params import (
    Adam,
    ModelParams,
    clip_grad_norm,
    load_params,
    load_tensors,
    save_params,
    save_tensors,
    sgd_adam_step,
)
from .tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    concat,
    cross_entropy,
    custom_op,
    div,
    embedding,
    exp,
    getitem,
    log,
    log_softmax,
    masked_fill,
    matmul,
    mean,
    mul,
    reshape,
    sigmoid,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)

__all__ = [name for name in dir() if not name.startswith("_")]
