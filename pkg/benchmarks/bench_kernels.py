"""Timing comparison of the numpy and numba kernel backends.

Runs each hot kernel on representative problem sizes under both backends
(best wall time of several repeats, after a JIT warm-up pass), checks that
the backends agree numerically, and times one end-to-end imputation.

Usage: python benchmarks/bench_kernels.py [--repeats 7]
"""

import argparse
import time

import numpy as np

from factorfill import StrictFactorConfig, SouthWestBlock, apply_missing, \
    gen_strict_factor_dgp, impute_panel
from factorfill._kernels import (
    HAVE_NUMBA,
    force_backend,
    masked_loadings,
    overlay_fill,
    pairwise_stats,
)

BACKENDS = ("numpy", "numba") if HAVE_NUMBA else ("numpy",)


def _best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _rel_diff(a, b):
    denom = max(1.0, float(np.nanmax(np.abs(a))))
    return float(np.nanmax(np.abs(a - b))) / denom


def build_cases(seed=0):
    rng = np.random.default_rng(seed)
    cases = []

    T, N, r = 500, 400, 5
    F = rng.standard_normal((T, r))
    X0 = rng.standard_normal((T, N))
    mask = rng.random((T, N)) > 0.15
    X0[~mask] = 0.0
    cases.append((f"masked_loadings T={T} N={N} r={r}",
                  lambda: masked_loadings(F, X0, mask)[0]))

    T2, N2 = 348, 339
    X2 = rng.standard_normal((T2, N2))
    mask2 = rng.random((T2, N2)) > 0.15
    X2[~mask2] = 0.0
    cases.append((f"pairwise_stats  T={T2} N={N2}",
                  lambda: pairwise_stats(X2, mask2)[0]))

    T3, N3 = 339, 100
    e = rng.standard_normal((T3, N3))
    rows, cols = np.nonzero(rng.random((T3, N3)) < 0.15)
    draws = rng.standard_normal(rows.size)
    cases.append((f"overlay_fill    {rows.size} cells",
                  lambda: overlay_fill(e, rows, cols, draws)))
    return cases


def bench_kernels(repeats):
    print(f"{'kernel':34s} " + " ".join(f"{b:>12s}" for b in BACKENDS)
          + ("      speedup" if len(BACKENDS) == 2 else "")
          + "   max rel diff")
    for name, fn in build_cases():
        times = {}
        outputs = {}
        for backend in BACKENDS:
            with force_backend(backend):
                fn()  # warm-up (JIT compile on first numba call)
                times[backend] = _best_time(fn, repeats)
                outputs[backend] = fn()
        row = f"{name:34s} " + " ".join(
            f"{times[b] * 1e3:10.3f}ms" for b in BACKENDS)
        if len(BACKENDS) == 2:
            row += f"   {times['numpy'] / times['numba']:8.2f}x"
            row += f"   {_rel_diff(outputs['numpy'], outputs['numba']):.2e}"
        print(row)


def bench_end_to_end(repeats):
    cfg = StrictFactorConfig(T=339, N_star=100, seed=1)
    panel, _ = gen_strict_factor_dgp(cfg)
    masked = apply_missing(panel, SouthWestBlock(0.625, 0.4))

    def job():
        impute_panel(masked, 5, method="TP_PLUS", transform="raw")

    print()
    for backend in BACKENDS:
        with force_backend(backend):
            job()
            t = _best_time(job, repeats)
        print(f"impute_panel TP_PLUS 339x100 [{backend:5s}]  {t * 1e3:8.1f}ms")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba not importable; timing the numpy backend only")
    bench_kernels(args.repeats)
    bench_end_to_end(args.repeats)


if __name__ == "__main__":
    main()
