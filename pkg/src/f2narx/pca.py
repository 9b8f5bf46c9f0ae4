"""Standardised PCA of local window functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PcaProjector:
    """Standardisation constants plus the retained eigenvectors.

    Attributes
    ----------
    mu, sigma : (n_T,) arrays
        Column means and sample standard deviations of the fit matrix.
    V : (n_T, m) array
        Orthonormal retained eigenvectors of the standardised covariance.
    lambdas : (n_T,) array
        All eigenvalues, descending, clamped at zero.
    """

    mu: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    lambdas: np.ndarray
    eps_lambda: float

    @property
    def m(self) -> int:
        return self.V.shape[1]

    @property
    def n_T(self) -> int:
        return self.V.shape[0]

    @property
    def explained(self) -> float:
        total = self.lambdas.sum()
        return float(self.lambdas[: self.m].sum() / total) if total > 0 else 1.0


def n_components(lambdas: np.ndarray, eps_lambda: float) -> int:
    """Smallest ``m`` whose leading eigenvalues reach the proportion ``eps_lambda``."""
    lam = np.clip(lambdas, 0.0, None)
    total = lam.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(lam) / total
    # Guard the eps = 1 case against round-off in the last cumulative sum.
    frac[-1] = 1.0
    return int(np.searchsorted(frac, eps_lambda - 1e-15, side="left") + 1)


def fit_pca(M: np.ndarray, eps_lambda: float) -> PcaProjector:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 2:
        raise ValueError("PCA needs a 2-d matrix with at least two rows")
    if not np.all(np.isfinite(M)):
        raise ValueError("PCA input has non-finite entries")
    if not 0 < eps_lambda <= 1:
        raise ValueError("eps_lambda must lie in (0, 1]")
    mu = M.mean(axis=0)
    sigma = M.std(axis=0, ddof=1)
    scale = np.max(np.abs(M))
    sigma = np.where(sigma <= 1e-12 * max(scale, np.finfo(float).tiny), 1.0, sigma)
    Z = (M - mu) / sigma
    C = Z.T @ Z / (M.shape[0] - 1)
    C = 0.5 * (C + C.T)
    w, vecs = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    vecs = vecs[:, order]
    # Deterministic sign: largest-magnitude loading of each vector is positive.
    piv = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[piv, np.arange(vecs.shape[1])])
    m = n_components(w, eps_lambda)
    return PcaProjector(mu, sigma, np.ascontiguousarray(vecs[:, :m]), w, float(eps_lambda))


def project(p: PcaProjector, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[-1] != p.n_T:
        raise ValueError(f"rows have {rows.shape[-1]} columns, projector expects {p.n_T}")
    return ((rows - p.mu) / p.sigma) @ p.V


def inverse_project(p: PcaProjector, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != p.m:
        raise ValueError(f"features have {features.shape[-1]} columns, projector keeps {p.m}")
    return (features @ p.V.T) * p.sigma + p.mu


def inverse_variance(p: PcaProjector, feature_var: np.ndarray) -> np.ndarray:
    """Pointwise variance of ``inverse_project`` for independent feature variances."""
    return (np.asarray(feature_var) @ (p.V**2).T) * p.sigma**2


def inverse_covariance(p: PcaProjector, feature_cov: np.ndarray) -> np.ndarray:
    """Pointwise variance of ``inverse_project`` for feature covariances ``(..., m, m)``."""
    C = np.asarray(feature_cov)
    return np.einsum("tk,...kl,tl->...t", p.V, C, p.V) * p.sigma**2
