"""Principal-components factor estimation on a complete matrix.

Given a T x N matrix X, estimate a rank-r factor model X ~ F Lam' by SVD of
Z = X / sqrt(N T).  Factors are normalized so F'F / T = I_r and loadings so
Lam'Lam is diagonal with non-increasing diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankTooLarge, SvdFailure


@dataclass(frozen=True)
class FactorModelFit:
    """Rank-r factor decomposition of a T x N matrix.

    F      -- T x r factors, F'F / T = I_r
    Lambda -- N x r loadings, Lambda'Lambda diagonal, non-increasing
    D2     -- length-r squared singular values of X / sqrt(N T), descending
    """

    F: np.ndarray
    Lambda: np.ndarray
    D2: np.ndarray

    @property
    def r(self) -> int:
        return self.F.shape[1]


def _fix_signs(U: np.ndarray, V: np.ndarray) -> None:
    # Column sign convention: largest-magnitude loading entry positive.
    # Ties resolve to the smallest row index via argmax.
    for k in range(U.shape[1]):
        j = int(np.argmax(np.abs(V[:, k])))
        if V[j, k] < 0.0:
            U[:, k] = -U[:, k]
            V[:, k] = -V[:, k]


def apc(X: np.ndarray, r: int) -> FactorModelFit:
    """Estimate r factors and loadings from a complete T x N matrix."""
    X = np.asarray(X, dtype=np.float64)
    T, N = X.shape
    if not 1 <= r <= min(T, N):
        raise RankTooLarge(r, min(T, N))
    Z = X / np.sqrt(N * T)
    try:
        U, d, Vt = np.linalg.svd(Z, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - BLAS-dependent
        raise SvdFailure(str(exc)) from exc
    U = U[:, :r].copy()
    V = Vt[:r].T.copy()
    d = d[:r]
    _fix_signs(U, V)
    F = np.sqrt(T) * U
    Lam = np.sqrt(N) * V * d
    return FactorModelFit(F=F, Lambda=Lam, D2=d * d)


def common_component(fit: FactorModelFit) -> np.ndarray:
    """Fitted common component F Lambda', the best rank-r approximation."""
    return fit.F @ fit.Lambda.T
