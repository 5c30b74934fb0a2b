#!/usr/bin/env python3
"""Compare the compiled rasterization kernel against the numpy fallback.

Runs the same workload (per-fixation frame renders plus pooled heatmap
accumulation) through both backends and prints a timing table. The two
must also agree numerically; this doubles as a coarse parity check.

Usage: python benchmarks/bench_kernels.py [--fixations N] [--size PX]
"""

import argparse
import time

import numpy as np

from corax import _kernels_py

try:
    from corax import _kernels
except ImportError:
    _kernels = None


def workload(accumulate, n_fixations: int, size: int, repeats: int) -> tuple[float, np.ndarray]:
    rng = np.random.default_rng(7)
    centers = rng.uniform(0, size, size=(n_fixations, 2))
    sigmas = rng.uniform(1.0, size / 24.0, size=n_fixations)
    amps = rng.uniform(80, 600, size=n_fixations)

    start = time.perf_counter()
    pooled = np.zeros((size, size))
    for _ in range(repeats):
        pooled[:] = 0.0
        for (cx, cy), sigma, amp in zip(centers, sigmas, amps):
            frame = np.zeros((size, size))
            accumulate(frame, cx, cy, sigma, amp)
            accumulate(pooled, cx, cy, sigma, amp)
    elapsed = (time.perf_counter() - start) / repeats
    return elapsed, pooled


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixations", type=int, default=400)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"workload: {args.fixations} fixations on {args.size}x{args.size}, "
          f"best of {args.repeats}")

    py_time, py_pooled = workload(
        _kernels_py.accumulate_gaussian, args.fixations, args.size, args.repeats
    )
    print(f"  python (numpy) : {py_time * 1000:9.2f} ms")

    if _kernels is None:
        print("  cython         : not built (pip install -e . to compile)")
        return

    cy_time, cy_pooled = workload(
        _kernels.accumulate_gaussian, args.fixations, args.size, args.repeats
    )
    print(f"  cython         : {cy_time * 1000:9.2f} ms")
    print(f"  speedup        : {py_time / cy_time:9.2f}x")

    err = np.abs(py_pooled - cy_pooled).max()
    rel = err / max(py_pooled.max(), 1e-12)
    print(f"  max abs diff   : {err:.3e} (relative {rel:.3e})")
    assert rel < 1e-12, "backends diverged"


if __name__ == "__main__":
    main()
