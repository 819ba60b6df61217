"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends receive identical inputs; the script also reports the largest
disagreement between them.
"""

import argparse
import timeit

import numpy as np

from varsense import _kernels_py, kernels

try:
    from varsense._ext import _kernels as compiled
except ImportError:
    compiled = None


def homodyne_case(n, noisy, rng):
    z = rng.standard_normal(n)
    basis = 0.03 * rng.standard_normal(n) if noisy else None
    args = (0.0, 0.0, 8.82, 1.6, 0.33, 0.0, 15.4, 0.1, z)
    return lambda impl: kernels.homodyne_sample_stats(*args, basis_offsets=basis, impl=impl)


def rbf_case(m, n, rng):
    a = rng.uniform(-np.pi, np.pi, (m, 2))
    b = rng.uniform(-np.pi, np.pi, (n, 2))
    return lambda impl: kernels.rbf_cross(a, b, 0.45, 1.0, impl=impl)


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.2 and number < 10_000:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = [
        ("homodyne n=1e4", homodyne_case(10_000, False, rng)),
        ("homodyne n=1e4 phase noise", homodyne_case(10_000, True, rng)),
        ("homodyne n=1e6 phase noise", homodyne_case(1_000_000, True, rng)),
        ("rbf 186 x 186", rbf_case(186, 186, rng)),
        ("rbf 40000 x 186", rbf_case(40_000, 186, rng)),
    ]
    print(f"active backend: {kernels.BACKEND}")
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'case':30s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speed-up':>9s} {'max diff':>10s}")
    for name, fn in cases:
        t_py = best_time(lambda: fn(_kernels_py), args.repeat) * 1e3
        if compiled is None:
            print(f"{name:30s} {t_py:11.3f}")
            continue
        t_c = best_time(lambda: fn(compiled), args.repeat) * 1e3
        diff = np.max(np.abs(np.asarray(fn(compiled)) - np.asarray(fn(_kernels_py))))
        print(f"{name:30s} {t_py:11.3f} {t_c:12.3f} {t_py / t_c:8.1f}x {diff:10.1e}")


if __name__ == "__main__":
    main()
