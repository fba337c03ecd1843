"""Compare the numba and numpy kernel implementations.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run once untimed on the numba path to trigger compilation.
"""

import argparse
import time

import numpy as np

from myopic_avc import kernels, systems
from myopic_avc.solver import _dedupe, simplex_grid
from myopic_avc.strategy import ObjectiveModel


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_typical(repeat):
    rng = np.random.default_rng(0)
    n, N = 128, 20000
    words = rng.integers(0, 4, size=(N, n))
    seq = rng.integers(0, 2, size=n)
    targets = rng.dirichlet(np.ones(8), size=16)
    res = {}
    for use in (True, False):
        if use and kernels.numba is None:
            continue
        fn = lambda: kernels.typical_mask(words, seq, 4, 2, targets, 0.05, use_numba=use)  # noqa: E731
        fn()
        res["numba" if use else "numpy"] = timed(fn, repeat)
    return f"typical_mask  words={N} n={n} targets=16", res


def bench_oracle(repeat):
    sp = systems.random_spec(0)
    model = ObjectiveModel(sp)
    q = simplex_grid(2, 16)
    pz, group = _dedupe(q @ sp.obs)
    rows = simplex_grid(model.nu, 8)  # 165 rows -> 27225 P(U|Z) points
    res = {}
    for use in (True, False):
        if use and kernels.numba is None:
            continue
        fn = lambda: kernels.oracle_group_max(model.B, rows, q, group, pz, use_numba=use)  # noqa: E731
        fn()
        res["numba" if use else "numpy"] = timed(fn, repeat)
    return f"oracle_group_max  P-grid={len(rows) ** 2} q-grid={len(q)}", res


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':48s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for bench in (bench_typical, bench_oracle):
        name, res = bench(args.repeat)
        nb, npy = res.get("numba", float("nan")), res["numpy"]
        print(f"{name:48s} {nb:10.4f} {npy:10.4f} {npy / nb:8.1f}x")


if __name__ == "__main__":
    main()
