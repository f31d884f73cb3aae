#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python/numpy fallback.

The fallback path is what you get with MSFA_NUMBA=0 (or without numba
installed); this script flips the dispatch at runtime so both paths run in
one process and asserts they produce identical bytes while timing them.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from msfacomp import accel, dwt, entropy
from msfacomp.entropy import bitplane_count


def timeit(fn, repeat):
    fn()                                   # warm-up (JIT compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dwt(shape, levels, repeat):
    rng = np.random.default_rng(0)
    plane = rng.uniform(-2048, 2048, shape)
    out = {}
    for use_numba in (True, False):
        if use_numba and not accel.HAVE_NUMBA:
            continue
        accel.set_numba(use_numba)
        out[use_numba] = timeit(
            lambda: dwt.dwt_inverse(dwt.dwt_forward(plane, levels)), repeat)
    accel.set_numba(True)
    return out


def bench_entropy(shape, repeat):
    rng = np.random.default_rng(1)
    q = rng.integers(-2048, 2048, shape).astype(np.int32)
    q[rng.random(shape) < 0.7] = 0
    planes = bitplane_count(q)
    streams = {}
    out = {}
    for use_numba in (True, False):
        if use_numba and not accel.HAVE_NUMBA:
            continue
        accel.set_numba(use_numba)
        streams[use_numba] = entropy.entropy_encode(q)
        data = streams[use_numba]
        out[use_numba] = timeit(
            lambda: entropy.entropy_decode(entropy.entropy_encode(q),
                                           shape, planes), repeat)
    accel.set_numba(True)
    if len(streams) == 2:
        assert streams[True] == streams[False], "paths diverged"
    return out


def show(name, result):
    if True not in result:
        print(f"{name:28s} numba unavailable, numpy "
              f"{result[False] * 1e3:9.2f} ms")
        return
    nb = result[True] * 1e3
    if False in result:
        py = result[False] * 1e3
        print(f"{name:28s} numba {nb:9.2f} ms   numpy {py:9.2f} ms   "
              f"speedup {py / nb:6.1f}x")
    else:
        print(f"{name:28s} numba {nb:9.2f} ms")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller grids, fewer repeats")
    args = ap.parse_args()
    repeat = 3
    dwt_shape = (256, 256) if args.quick else (512, 512)
    ent_shape = (64, 64) if args.quick else (128, 128)
    print(f"numba available: {accel.HAVE_NUMBA}")
    print("=" * 72)
    show(f"dwt fwd+inv {dwt_shape} L=5", bench_dwt(dwt_shape, 5, repeat))
    show(f"entropy enc+dec {ent_shape}", bench_entropy(ent_shape, repeat))


if __name__ == "__main__":
    main()
