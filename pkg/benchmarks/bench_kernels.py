"""Compiled loop kernels vs numpy fallbacks on metric-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""
import argparse
import time

import numpy as np

from gazepath import kernels


def timeit(fn, repeats):
    fn()  # compile / warm caches
    t = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        t[i] = time.perf_counter() - t0
    return float(np.median(t)) * 1e6


def cases(rng):
    a = rng.integers(0, 6, 140).astype(np.int64)  # 7 fixations x 20 duration repeats
    b = rng.integers(0, 6, 120).astype(np.int64)
    pts = rng.uniform(0, 1680, size=(70, 2))
    taps, radius = kernels.gaussian_taps(30.0)
    xs = rng.integers(0, 1680, 70).astype(np.int64)
    ys = rng.integers(0, 1050, 70).astype(np.int64)
    yield ("levenshtein 140x120", lambda: kernels.levenshtein_loop(a, b), lambda: kernels.levenshtein_numpy(a, b))
    yield ("nw_score 140x120", lambda: kernels.nw_score_loop(a, b, 1.0, 0.0, 0.0),
           lambda: kernels.nw_score_numpy(a, b, 1.0, 0.0, 0.0))
    yield ("mean_shift 70 pts", lambda: kernels.mean_shift_loop(pts, 60.0, 300, 0.06),
           lambda: kernels.mean_shift_numpy(pts, 60.0, 300, 0.06))
    yield ("splat 70 fix 1050x1680", lambda: kernels.splat_loop(np.zeros((1050, 1680)), xs, ys, taps, radius),
           lambda: kernels.splat_numpy(np.zeros((1050, 1680)), xs, ys, taps, radius))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numba us':>12}{'numpy us':>12}{'ratio':>9}")
    for name, fast, slow in cases(rng):
        tf, ts = timeit(fast, args.repeats), timeit(slow, args.repeats)
        print(f"{name:<26}{tf:>12.1f}{ts:>12.1f}{ts / tf:>8.1f}x")


if __name__ == "__main__":
    main()
