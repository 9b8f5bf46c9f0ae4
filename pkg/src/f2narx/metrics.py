"""Normalised mean squared error for trajectories."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .data import Trajectory


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, Trajectory) else x, dtype=np.float64)


def nmse(y_true, y_pred) -> float:
    """``mean((y - yhat)^2) / var(y)`` with the population variance of ``y_true``."""
    y, yh = _values(y_true), _values(y_pred)
    if y.shape != yh.shape or y.ndim != 1:
        raise ValueError(f"trajectories must be 1-d of equal length, got {y.shape} and {yh.shape}")
    v = y.var()
    if not v > 0:
        raise ValueError("reference trajectory is constant; NMSE is undefined")
    return float(np.mean((y - yh) ** 2) / v)


def nmse_rows(Y_true: np.ndarray, Y_pred: np.ndarray) -> np.ndarray:
    """Row-wise NMSE of two ``(n, N_t)`` arrays."""
    Y, Yh = np.atleast_2d(Y_true), np.atleast_2d(Y_pred)
    if Y.shape != Yh.shape:
        raise ValueError(f"shape mismatch {Y.shape} vs {Yh.shape}")
    v = Y.var(axis=1)
    if np.any(~(v > 0)):
        raise ValueError("a reference trajectory is constant; NMSE is undefined")
    return np.mean((Y - Yh) ** 2, axis=1) / v


def mean_nmse(pairs: Iterable) -> float:
    """Average NMSE over ``(y_true, y_pred)`` pairs."""
    errs = [nmse(a, b) for a, b in pairs]
    if not errs:
        raise ValueError("mean_nmse needs at least one pair")
    return float(np.mean(errs))
