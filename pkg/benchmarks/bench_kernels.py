#!/usr/bin/env python3
"""Benchmark the JIT kernels against their pure-numpy twins.

Run with no arguments: times the kernels in the current configuration and,
when numba is active, re-runs itself in a subprocess with HSFUSE_NO_NUMBA=1
to time the fallback path, then prints a comparison table.

The FFT- and BLAS-bound parts of the solver are not benchmarked here; they
are the same numpy code on both paths.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from hsfuse import kernels
from hsfuse._accel import ENV_FLAG, NUMBA_ENABLED

REPEATS = 5


def time_call(fn, *args):
    fn(*args)  # warmup (includes JIT compilation when enabled)
    best = float("inf")
    for _ in range(REPEATS):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run_benchmarks():
    rng = np.random.default_rng(0)
    stack = rng.standard_normal((30, 256, 256))
    taps = rng.standard_normal((5, 5))
    gh = rng.standard_normal((10, 256 * 256))
    gv = rng.standard_normal((10, 256 * 256))
    planes = rng.standard_normal((8, 256, 256))

    return {
        "numba": NUMBA_ENABLED,
        "cyclic_conv2d 30x256x256 k=5": time_call(kernels.cyclic_conv2d, stack, taps),
        "pixel_norms 10x65536": time_call(kernels.pixel_norms, gh, gv),
        "vtv_shrink 10x65536": time_call(kernels.vtv_shrink, gh, gv, 0.5),
        "window_sums 8x256x256 w=32": time_call(kernels.window_sums, planes, 32),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--json", action="store_true", help="emit raw timings as JSON")
    args = parser.parse_args()

    results = run_benchmarks()
    if args.json:
        json.dump(results, sys.stdout)
        return

    label = "numba" if results["numba"] else "numpy fallback"
    print(f"timings with {label}:")
    for name, value in results.items():
        if name != "numba":
            print(f"  {name:<32} {value * 1e3:8.2f} ms")

    if not results["numba"]:
        return

    env = dict(os.environ, **{ENV_FLAG: "1"})
    fallback = json.loads(
        subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--json"],
            env=env, check=True, capture_output=True, text=True,
        ).stdout
    )
    print("\ncomparison (numpy fallback vs numba):")
    print(f"  {'kernel':<32} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, value in results.items():
        if name == "numba":
            continue
        other = fallback[name]
        print(f"  {name:<32} {value * 1e3:8.2f}ms {other * 1e3:8.2f}ms {other / value:8.2f}x")


if __name__ == "__main__":
    main()
