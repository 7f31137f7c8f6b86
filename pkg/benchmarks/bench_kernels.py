"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 65] [--points 200000] [--repeat 5]

Both backends are imported directly, so one run compares them regardless of
``CYLVAR_PURE``. The script checks that the two agree before timing them.
"""
import argparse
import timeit

import numpy as np

from cylvar import _kernels_py

try:
    from cylvar import _kernels as compiled
except ImportError:
    compiled = None


def best_of(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=65, help="nodes per axis of the 3D grid")
    parser.add_argument("--points", type=int, default=200_000, help="interpolation points")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    n, lo = args.n, -4.0
    h = -2.0 * lo / (n - 1)
    values = rng.standard_normal((n, n, n, 3))
    pts = rng.uniform(1.1 * lo, -1.1 * lo, (args.points, 3))
    alpha = 0.7

    cases = {
        "trilinear": lambda impl: impl.trilinear(values, lo, h, pts),
        "rotate_pullback": lambda impl: impl.rotate_pullback(values, lo, h, alpha),
    }
    print(f"grid {n}^3 x 3, {args.points} points, best of {args.repeat}")
    print(f"{'kernel':<16} {'numpy [s]':>10} {'cython [s]':>11} {'speed-up':>9}")
    for name, run in cases.items():
        t_py = best_of(lambda: run(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:<16} {t_py:>10.4f} {'n/a':>11} {'n/a':>9}")
            continue
        ref, got = run(_kernels_py), run(compiled)
        if not np.allclose(ref, got, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree (max diff {np.max(np.abs(ref - got)):.3e})")
        t_cy = best_of(lambda: run(compiled), args.repeat)
        print(f"{name:<16} {t_py:>10.4f} {t_cy:>11.4f} {t_py / t_cy:>8.1f}x")
    if compiled is None:
        print("compiled extension not built; reinstall with Cython available to compare")


if __name__ == "__main__":
    main()
