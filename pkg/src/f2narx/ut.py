"""Unscented-transform estimate of the predictive variance under an uncertain input.

For a regressor with mean ``mu(x)`` and variance ``s2(x)`` and a Gaussian input
``x ~ N(m, S)`` the law of total variance gives

    Var = E[s2(x)] + Var[mu(x)],

and both moments are approximated with ``2p + 1`` sigma points.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgError, cholesky

KAPPA_POLICIES = ("fixed", "clamped")
UT_COVARIANCES = ("full", "diagonal")


def ut_kappa(p: int, policy: str = "fixed") -> float:
    """``kappa`` with ``p + kappa = 3``; the clamped policy never goes below zero."""
    if policy not in KAPPA_POLICIES:
        raise ValueError(f"unknown kappa policy {policy!r}; expected one of {KAPPA_POLICIES}")
    kappa = 3.0 - p
    if policy == "clamped" and kappa < 0:
        warnings.warn(f"clamping kappa={kappa:g} to 0 for p={p}", stacklevel=2)
        kappa = 0.0
    return kappa


def _sqrt_cov(Sigma: np.ndarray) -> np.ndarray:
    d = np.diag(Sigma)
    if np.any(d < 0):
        raise ValueError("covariance has a negative diagonal entry")
    if np.count_nonzero(Sigma - np.diag(d)) == 0:
        return np.diag(np.sqrt(d))
    try:
        return cholesky(Sigma, lower=True)
    except LinAlgError:
        # Semidefinite input: symmetric square root via eigendecomposition.
        w, V = np.linalg.eigh(0.5 * (Sigma + Sigma.T))
        return V * np.sqrt(np.clip(w, 0.0, None))


def sigma_points(mu_x, Sigma_x, kappa: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sigma points ``(2p+1, p)`` and their weights.

    Points are ``mu``, ``mu + c_i`` and ``mu - c_i`` where ``c_i`` is column ``i``
    of a square root of ``(p + kappa) * Sigma``.
    """
    mu_x = np.asarray(mu_x, dtype=np.float64).reshape(-1)
    p = mu_x.size
    Sigma_x = np.asarray(Sigma_x, dtype=np.float64)
    if Sigma_x.ndim == 1:
        Sigma_x = np.diag(Sigma_x)
    if Sigma_x.shape != (p, p):
        raise ValueError(f"covariance must be {p}x{p}, got {Sigma_x.shape}")
    kappa = 3.0 - p if kappa is None else float(kappa)
    if p + kappa <= 0:
        raise ValueError("p + kappa must be positive")
    C = _sqrt_cov((p + kappa) * Sigma_x)
    S = np.vstack([mu_x, mu_x + C.T, mu_x - C.T])
    w = np.full(2 * p + 1, 1.0 / (2.0 * (p + kappa)))
    w[0] = kappa / (p + kappa)
    return S, w


def ut_variance(mu_fn, var_fn, mu_x, Sigma_x, kappa: float | None = None, policy: str = "fixed") -> float:
    """Unscented estimate of ``E[var_fn(x)] + Var[mu_fn(x)]`` for ``x ~ N(mu_x, Sigma_x)``.

    ``mu_fn`` and ``var_fn`` take an ``(n, p)`` array and return ``n`` values.
    ``kappa`` overrides ``policy`` when given.
    """
    mu_x = np.asarray(mu_x, dtype=np.float64).reshape(-1)
    if kappa is None:
        kappa = ut_kappa(mu_x.size, policy)
    S, w = sigma_points(mu_x, Sigma_x, kappa)
    mu = np.asarray(mu_fn(S), dtype=np.float64).reshape(-1)
    s2 = np.asarray(var_fn(S), dtype=np.float64).reshape(-1)
    return float(max(np.sum(w * (s2 + (mu - mu[0]) ** 2)), 0.0))


def diagonal_ut_weights(p: int, n_uncertain: int, kappa: float) -> tuple[float, float]:
    """Effective ``(centre, spread-point)`` weights when only ``n_uncertain`` of ``p``
    coordinates carry variance.

    Sigma points along zero-variance coordinates coincide with the centre, so
    their weights fold into the centre weight.
    """
    if p + kappa <= 0:
        raise ValueError("p + kappa must be positive")
    w_i = 1.0 / (2.0 * (p + kappa))
    w_0 = kappa / (p + kappa) + 2.0 * (p - n_uncertain) * w_i
    return w_0, w_i
