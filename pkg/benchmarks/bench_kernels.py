"""Time the dynamic-programming kernels under each available backend.

    python benchmarks/bench_kernels.py [--repeat N] [--frames T]

Prints one row per kernel with the median wall time of each backend and the
speed-up of the compiled one.  Outputs are cross-checked before timing.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from childasr import kernels
from childasr.ctc import expand_label, log_normalize


def cases(T: int, rng: np.random.Generator):
    lp = log_normalize(rng.normal(size=(T, 30)))
    y = rng.integers(1, 30, size=T // 4)
    ext = expand_label(y)
    r0 = np.full((T, 2), -np.inf)
    r0[:, 1] = np.cumsum(lp[:, 0])
    cands = np.arange(1, 30)
    ref, hyp = rng.integers(0, 40, size=T), rng.integers(0, 40, size=T)
    return {
        "ctc_alpha": lambda impl: kernels.ctc_alpha(lp, ext, 0, impl=impl),
        "ctc_beta": lambda impl: kernels.ctc_beta(lp, ext, 0, impl=impl),
        "ctc_prefix_extend": lambda impl: kernels.ctc_prefix_extend(lp, r0, -1, cands, 0, True, impl=impl),
        "edit_table": lambda impl: kernels.edit_table(ref, hyp, impl=impl),
    }


def median_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--frames", type=int, default=200)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(impls)}")
    header = f"{'kernel':<20}" + "".join(f"{name + ' ms':>14}" for name in impls)
    print(header + (f"{'speed-up':>10}" if "cython" in impls else ""))
    for name, fn in cases(args.frames, np.random.default_rng(0)).items():
        outs = [fn(impl) for impl in impls.values()]
        for o in outs[1:]:
            a, b = (o, outs[0]) if not isinstance(o, tuple) else (o[1], outs[0][1])
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
        ms = {k: 1e3 * median_time(lambda impl=impl: fn(impl), args.repeat) for k, impl in impls.items()}
        row = f"{name:<20}" + "".join(f"{v:>14.3f}" for v in ms.values())
        if "cython" in ms:
            row += f"{ms['python'] / ms['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
