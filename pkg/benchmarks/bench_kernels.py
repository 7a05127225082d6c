"""Time the pointwise kernels on both backends and report the speedups.

Usage: python3 benchmarks/bench_kernels.py [--n 96] [--repeats 5]

Each kernel is exercised at the shape it sees on the stepping/diagnostic hot
path.  The numba variants are warmed once before timing so compilation cost
never pollutes the medians.
"""

import argparse
import time

import numpy as np

from anisowave.kernels import get_impls


def _median_time(fn, args, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def build_cases(n, rng):
    shape = (n, n, n)
    rshape = (n, n, n // 2 + 1)
    vals = rng.normal(size=shape)
    sym = rng.uniform(-8.0, 8.0, size=rshape)
    q = np.sqrt(np.sum(np.square(np.mgrid[0:n, 0:n, 0:n] - n / 2.0), axis=0))
    q *= 20.0 / q.max()
    edges = np.linspace(0.0, 20.0, 25)
    weights = rng.uniform(0.5, 2.0, size=rshape)
    rvals = rng.normal(size=rshape)
    mask = q <= 10.0
    stack = rng.normal(size=(10, n, n, n))
    coeffs = rng.normal(size=8)
    idx = rng.integers(0, 10, size=(8, 3))

    return [
        ("chi_eval", (sym,)),
        ("chi_d1_eval", (sym,)),
        ("chi_d2_eval", (sym,)),
        ("binned_abs_max", (vals, q, edges)),
        ("weighted_sq_sum", (rvals, weights)),
        ("masked_abs_max", (vals, mask)),
        ("accumulate_products",
         (np.zeros(shape), coeffs, idx, stack)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=96,
                    help="cube edge for the synthetic fields")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    np_impls = get_impls("numpy")
    nb_impls = get_impls("numba")
    if nb_impls is None:
        print("numba unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = build_cases(args.n, rng)

    # agreement check + JIT warmup in one pass
    for name, case_args in cases:
        a = np_impls[name](*[np.copy(x) if isinstance(x, np.ndarray) else x
                             for x in case_args])
        b = nb_impls[name](*[np.copy(x) if isinstance(x, np.ndarray) else x
                             for x in case_args])
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    print(f"n = {args.n}, repeats = {args.repeats} (median)")
    print(f"{'kernel':22s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, case_args in cases:
        t_np = _median_time(np_impls[name], case_args, args.repeats)
        t_nb = _median_time(nb_impls[name], case_args, args.repeats)
        print(f"{name:22s} {t_np*1e3:9.2f}ms {t_nb*1e3:9.2f}ms "
              f"{t_np/t_nb:7.1f}x")


if __name__ == "__main__":
    main()
