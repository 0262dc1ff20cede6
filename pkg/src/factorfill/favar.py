"""Factor-augmented regression: OLS of an outcome on estimated factors and
observed covariates, with a heteroskedasticity-robust sandwich covariance.

The factor block of the coefficient vector is identified only up to the
factor rotation; fitted values and the covariate block are invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, HorizonTooLarge, RankDeficientDesign
from .impute import ImputationResult


@dataclass(frozen=True)
class FavarFit:
    """OLS fit of y_{t+h} on z_t = (F_t', W_t')'.

    delta stacks the factor coefficients (first r entries, identified up to
    rotation) over the covariate coefficients; cov is the White sandwich.
    """

    delta: np.ndarray
    cov: np.ndarray
    h: int
    T_used: int
    r: int
    q: int

    @property
    def alpha(self) -> np.ndarray:
        return self.delta[: self.r]

    @property
    def beta(self) -> np.ndarray:
        return self.delta[self.r:]

    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def favar_fit(y: np.ndarray, W: np.ndarray | None,
              result: ImputationResult, h: int = 0) -> FavarFit:
    """Regress y_{t+h} on the estimated factors and W_t for t = 1..T-h.

    cov = S^-1 (1/T' sum z_t z_t' eps_t^2) S^-1 / T' with S = (1/T') sum
    z_t z_t' and T' = T - h; equivalently the standard HC0 sandwich.
    """
    F = result.fit.F
    T = F.shape[0]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != T:
        raise DataValidationError(f"y length {y.shape[0]} != panel T {T}")
    if W is None:
        W = np.empty((T, 0))
    else:
        W = np.asarray(W, dtype=np.float64)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[0] != T:
            raise DataValidationError(f"W has {W.shape[0]} rows, expected {T}")
    if not np.isfinite(y).all() or not np.isfinite(W).all():
        raise DataValidationError("y and W must be finite (no missing cells)")
    r = F.shape[1]
    q = W.shape[1]
    p = r + q
    if h < 0:
        raise DataValidationError("horizon must be nonnegative")
    T_used = T - h
    if T_used < p + 1:
        raise HorizonTooLarge(h, T)
    Z = np.hstack([F, W])[:T_used]
    yy = y[h:]
    S = Z.T @ Z / T_used
    w_eig = np.linalg.eigvalsh(S)
    if w_eig[0] <= 1e-12 * max(1.0, float(w_eig[-1])):
        raise RankDeficientDesign(
            "regressor matrix is numerically rank deficient"
        )
    delta = np.linalg.solve(S * T_used, Z.T @ yy)
    eps = yy - Z @ delta
    meat = (Z * (eps * eps)[:, None]).T @ Z / T_used
    S_inv = np.linalg.inv(S)
    cov = S_inv @ meat @ S_inv / T_used
    cov = 0.5 * (cov + cov.T)
    return FavarFit(delta=delta, cov=cov, h=h, T_used=T_used, r=r, q=q)
