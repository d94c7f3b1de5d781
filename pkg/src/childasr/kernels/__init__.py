"""Hot dynamic-programming kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is imported.  Set ``CHILDASR_KERNELS=python`` to force the fallback.
Callers always go through the wrappers here, which normalise dtypes.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _fallback


def _load_compiled() -> ModuleType | None:
    if os.environ.get("CHILDASR_KERNELS", "").lower() == "python":
        return None
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"
_impl: ModuleType = _compiled if _compiled is not None else _fallback


def backends() -> dict[str, ModuleType]:
    """Every importable backend by name (for equivalence tests and benchmarks)."""
    found = {"python": _fallback}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def ctc_alpha(log_probs, ext, blank: int, impl: ModuleType | None = None) -> np.ndarray:
    return (impl or _impl).ctc_alpha(_f64(log_probs), _i64(ext), int(blank))


def ctc_beta(log_probs, ext, blank: int, impl: ModuleType | None = None) -> np.ndarray:
    return (impl or _impl).ctc_beta(_f64(log_probs), _i64(ext), int(blank))


def ctc_prefix_extend(log_probs, r_prev, last: int, cands, blank: int, empty_prefix: bool,
                      impl: ModuleType | None = None):
    return (impl or _impl).ctc_prefix_extend(
        _f64(log_probs), _f64(r_prev), int(last), _i64(cands), int(blank), bool(empty_prefix)
    )


def edit_table(ref, hyp, impl: ModuleType | None = None) -> np.ndarray:
    return (impl or _impl).edit_table(_i64(ref), _i64(hyp))
