#!/usr/bin/env python3
"""Benchmark the special-function kernels: compiled extension vs numpy.

Times ``lgamma``, ``digamma``, and ``trigamma`` on positive log-spaced
inputs for both backends and prints the per-call best-of-N wall time
plus the speedup. Run from an environment where the package is
installed:

    python3 benchmarks/bench_special.py
    python3 benchmarks/bench_special.py --sizes 1000 1000000 --repeats 9
"""

import argparse
import time

import numpy as np

from auxue.diffkit import _special_py

try:
    from auxue.diffkit import _special_cy
except ImportError:
    _special_cy = None

FUNCTIONS = ("lgamma", "digamma", "trigamma")


def best_time(fn, x, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(x)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[10_000, 100_000, 500_000])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _special_cy is None:
        print("compiled backend not importable; timing the numpy fallback only")
    backends = [("python", _special_py)]
    if _special_cy is not None:
        backends.append(("cython", _special_cy))

    header = f"{'size':>9}  {'function':<9}" + "".join(
        f"  {name:>10}" for name, _ in backends
    )
    if _special_cy is not None:
        header += f"  {'speedup':>8}"
    print(header)

    rng = np.random.default_rng(0)
    for size in args.sizes:
        x = np.ascontiguousarray(10.0 ** rng.uniform(-2.0, 4.0, size))
        for fname in FUNCTIONS:
            times = [best_time(getattr(impl, fname), x, args.repeats)
                     for _, impl in backends]
            row = f"{size:>9}  {fname:<9}" + "".join(
                f"  {t * 1e3:>8.3f}ms" for t in times
            )
            if len(times) == 2:
                row += f"  {times[0] / times[1]:>7.1f}x"
            print(row)

    if _special_cy is not None:
        x = np.ascontiguousarray(10.0 ** rng.uniform(-2.0, 4.0, 100_000))
        print("\nmax |python - cython| on 1e5 fresh points:")
        for fname in FUNCTIONS:
            gap = np.max(np.abs(getattr(_special_py, fname)(x)
                                - getattr(_special_cy, fname)(x)))
            print(f"  {fname:<9} {gap:.3e}")


if __name__ == "__main__":
    main()
