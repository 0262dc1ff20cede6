"""Hot numerical kernels with two interchangeable backends.

Each kernel has a vectorized numpy implementation and a numba ``@njit``
implementation.  Backend selection, in priority order:

1. :func:`force_backend` context manager (tests, benchmarks),
2. the ``FACTORFILL_NUMBA`` environment variable
   ("0"/"numpy" forces numpy, "1"/"numba" forces numba),
3. auto: numba when importable, numpy otherwise.

Backends agree to floating-point roundoff (~1e-10 relative), not bitwise:
the loop and BLAS summation orders differ.

Kernel contracts: ``X0`` is the panel with zeros written at missing cells,
``mask`` is the boolean observation mask.  Kernels never raise on
data-dependent degeneracy; they return flags for the caller to act on.
"""

from __future__ import annotations

import os
import threading
from contextlib import contextmanager

import numpy as np

ENV_FLAG = "FACTORFILL_NUMBA"

# Relative threshold on the smallest eigenvalue of a per-series Gram matrix
# below which the normal equations are declared singular.
SINGULAR_RTOL = 1e-12

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_local = threading.local()


def _env_choice() -> str:
    raw = os.environ.get(ENV_FLAG, "").strip().lower()
    if raw in ("0", "numpy", "off", "false"):
        return "numpy"
    if raw in ("1", "numba", "on", "true"):
        return "numba"
    return "auto"


def active_backend() -> str:
    """Name of the backend the next kernel call will use."""
    choice = getattr(_local, "override", None) or _env_choice()
    if choice == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return choice


@contextmanager
def force_backend(name: str):
    """Temporarily pin the kernel backend ("numpy" or "numba")."""
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    prev = getattr(_local, "override", None)
    _local.override = name
    try:
        yield
    finally:
        _local.override = prev


# ---------------------------------------------------------------------------
# masked_loadings: per-series OLS of observed x_i on factor rows
# ---------------------------------------------------------------------------


def _masked_loadings_np(F, X0, mask):
    M = mask.astype(np.float64)
    # G[i] = sum_{t in J_i} F_t F_t', b[i] = sum_{t in J_i} F_t x_it
    G = np.einsum("tk,tl,ti->ikl", F, F, M, optimize=True)
    b = X0.T @ F
    w = np.linalg.eigvalsh(G)
    bad = w[:, 0] <= SINGULAR_RTOL * np.maximum(1.0, w[:, -1])
    if bad.any():
        G = G.copy()
        G[bad] = np.eye(F.shape[1])
    lam = np.linalg.solve(G, b[:, :, None])[:, :, 0]
    lam[bad] = 0.0
    return lam, bad


@njit(cache=True)
def _masked_loadings_nb(F, X0, mask):  # pragma: no cover - exercised via wrapper
    T, r = F.shape
    N = X0.shape[1]
    lam = np.zeros((N, r))
    bad = np.zeros(N, dtype=np.bool_)
    for i in range(N):
        G = np.zeros((r, r))
        b = np.zeros((r, 1))
        for t in range(T):
            if mask[t, i]:
                x = X0[t, i]
                for k in range(r):
                    fk = F[t, k]
                    b[k, 0] += fk * x
                    for l in range(k, r):
                        G[k, l] += fk * F[t, l]
        for k in range(r):
            for l in range(k + 1, r):
                G[l, k] = G[k, l]
        w = np.linalg.eigvalsh(G)
        if w[0] <= SINGULAR_RTOL * max(1.0, w[r - 1]):
            bad[i] = True
        else:
            sol = np.linalg.solve(G, b)
            for k in range(r):
                lam[i, k] = sol[k, 0]
    return lam, bad


def masked_loadings(F: np.ndarray, X0: np.ndarray, mask: np.ndarray):
    """Regress each series' observed cells on the matching factor rows.

    Returns ``(loadings, singular)`` where ``loadings`` is N x r and
    ``singular[i]`` marks series whose Gram matrix is numerically rank
    deficient (their loading row is zeroed).
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=bool)
    if active_backend() == "numba":
        return _masked_loadings_nb(F, X0, mask)
    return _masked_loadings_np(F, X0, mask)


# ---------------------------------------------------------------------------
# pairwise_stats: covariance over pair-specific overlaps
# ---------------------------------------------------------------------------


def _pairwise_stats_np(X0, mask):
    M = mask.astype(np.float64)
    n = M.T @ M
    Sx = X0.T @ M  # Sx[i, j] = sum over overlap(i, j) of x_it
    Sxy = X0.T @ X0
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = Sxy / n - (Sx / n) * (Sx.T / n)
    cov = 0.5 * (cov + cov.T)
    return cov, n.astype(np.int64)


@njit(cache=True)
def _pairwise_stats_nb(X0, mask):  # pragma: no cover - exercised via wrapper
    T, N = X0.shape
    cov = np.empty((N, N))
    n = np.zeros((N, N), dtype=np.int64)
    for i in range(N):
        for j in range(i, N):
            c = 0
            sx = 0.0
            sy = 0.0
            sxy = 0.0
            for t in range(T):
                if mask[t, i] and mask[t, j]:
                    xi = X0[t, i]
                    xj = X0[t, j]
                    c += 1
                    sx += xi
                    sy += xj
                    sxy += xi * xj
            n[i, j] = c
            n[j, i] = c
            if c > 0:
                v = sxy / c - (sx / c) * (sy / c)
            else:
                v = np.nan
            cov[i, j] = v
            cov[j, i] = v
    return cov, n


def pairwise_stats(X0: np.ndarray, mask: np.ndarray):
    """Covariance of every series pair over the periods both are observed.

    Means are pair-specific and the divisor is the overlap count (no
    degrees-of-freedom correction).  Returns ``(cov, counts)``; entries with
    an empty overlap are NaN.  The result need not be positive semidefinite.
    """
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=bool)
    if active_backend() == "numba":
        return _pairwise_stats_nb(X0, mask)
    return _pairwise_stats_np(X0, mask)


# ---------------------------------------------------------------------------
# overlay_fill: scatter drawn residuals into the missing cells
# ---------------------------------------------------------------------------


def _overlay_fill_np(e_base, rows, cols, draws):
    out = e_base.copy()
    out[rows, cols] = draws
    return out


@njit(cache=True)
def _overlay_fill_nb(e_base, rows, cols, draws):  # pragma: no cover
    out = e_base.copy()
    for k in range(rows.shape[0]):
        out[rows[k], cols[k]] = draws[k]
    return out


def overlay_fill(e_base: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                 draws: np.ndarray) -> np.ndarray:
    """Copy ``e_base`` and write ``draws[k]`` at ``(rows[k], cols[k])``."""
    e_base = np.ascontiguousarray(e_base, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    draws = np.ascontiguousarray(draws, dtype=np.float64)
    if active_backend() == "numba":
        return _overlay_fill_nb(e_base, rows, cols, draws)
    return _overlay_fill_np(e_base, rows, cols, draws)
