"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from randdp import _kernels


def cases(rows, g):
    k, n = 400, 4000
    z = np.zeros((rows, k))
    z[:, 190:206] = 1 / 16
    z += g.laplace(scale=2 / n, size=z.shape)
    draws = g.integers(0, 25, size=(rows, 501))
    cx = _kernels.count_rows(draws[:, :500], 25)
    cxp = _kernels.count_rows(draws[:, 1:], 25)
    return {
        "project k=400 n=4000": lambda nb: _kernels.project_rows(z, n, use_numba=nb),
        "count k=25 n=500": lambda nb: _kernels.count_rows(draws, 25, use_numba=nb),
        "verdict k=25": lambda nb: _kernels.verdict_rows(cx, cxp, _kernels.MECH_SPARSE, True,
                                                         1.0, use_numba=nb),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    g = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fn in cases(args.rows, g).items():
        if _kernels.HAVE_NUMBA:
            a, b = fn(True), fn(False)  # warm up, compile
            for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                assert np.array_equal(x, y), name
            t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat)) * 1e3
        else:
            t_nb = float("nan")
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{t_nb:>12.2f}{t_np:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
