"""Benchmark the compiled rank/KS kernels against the pure-NumPy fallback.

Run from the repository root:

    python3 benchmarks/kernel_benchmark.py

Covers the primitive kernels and the end-to-end null-table build that
dominates empirical-test calibration.
"""

import time

import numpy as np

from mcploc import RandomStream, _pykernels
from mcploc.testing import build_null_table

try:
    from mcploc import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_primitives():
    gen = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>6}{'numpy':>12}{'compiled':>12}{'speedup':>9}")
    for n in (200, 1000, 4000):
        v = gen.random(n)
        th = gen.random(n)
        for name in ("seq_ranks_forward", "seq_ranks_backward", "prefix_ks", "suffix_ks"):
            args = (v, th) if "ranks" in name else (v,)
            t_py = _time(getattr(_pykernels, name), *args)
            if _ckernels is None:
                print(f"{name:<22}{n:>6}{t_py * 1e3:>10.2f}ms{'-':>12}{'-':>9}")
                continue
            t_c = _time(getattr(_ckernels, name), *args)
            print(
                f"{name:<22}{n:>6}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
                f"{t_py / t_c:>8.1f}x"
            )


def bench_null_table():
    import mcploc.kernels as kernels

    print("\nnull-table build (B=200):")
    print(f"{'n':>6}{'backend':>10}{'time':>12}")
    for n in (200, 1000):
        for impl, label in ((_pykernels, "numpy"), (_ckernels, "compiled")):
            if impl is None:
                continue
            saved = (
                kernels.seq_ranks_forward, kernels.seq_ranks_backward,
                kernels.prefix_ks, kernels.suffix_ks,
            )
            kernels.seq_ranks_forward = impl.seq_ranks_forward
            kernels.seq_ranks_backward = impl.seq_ranks_backward
            kernels.prefix_ks = impl.prefix_ks
            kernels.suffix_ks = impl.suffix_ks
            try:
                t0 = time.perf_counter()
                build_null_table(n, 200, RandomStream(1).substream("null-table"))
                elapsed = time.perf_counter() - t0
            finally:
                (
                    kernels.seq_ranks_forward, kernels.seq_ranks_backward,
                    kernels.prefix_ks, kernels.suffix_ks,
                ) = saved
            print(f"{n:>6}{label:>10}{elapsed:>10.2f}s")


if __name__ == "__main__":
    if _ckernels is None:
        print("compiled kernels unavailable; timing the fallback only\n")
    bench_primitives()
    bench_null_table()
