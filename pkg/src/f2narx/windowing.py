"""Window geometry, segmentation and training-matrix assembly.

Sample 0 (the initial value) never belongs to a window. Window ``j``
(1-based) covers samples ``(j-1)*n_T + 1 .. j*n_T``; when ``N_t - 1`` is not a
multiple of ``n_T`` one extra window covering the final ``n_T`` samples is
appended and overlaps its predecessor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, TimeGrid


@dataclass(frozen=True)
class WindowGeometry:
    T: float
    n_T: int
    n_W: int
    overlap_last: bool
    n_t: int

    @property
    def starts(self) -> np.ndarray:
        """First sample index of every window."""
        s = 1 + self.n_T * np.arange(self.n_W)
        if self.overlap_last:
            s[-1] = self.n_t - self.n_T
        return s

    @property
    def index(self) -> np.ndarray:
        """``(n_W, n_T)`` sample indices of all windows."""
        return self.starts[:, None] + np.arange(self.n_T)[None, :]

    @property
    def n_overlap(self) -> int:
        """Number of samples the last window shares with its predecessor."""
        if not self.overlap_last:
            return 0
        return (self.n_W - 1) * self.n_T + 1 - (self.n_t - self.n_T)


def make_geometry(T: float, grid: TimeGrid) -> WindowGeometry:
    ratio = T / grid.dt
    n_T = int(round(ratio))
    if n_T < 1:
        raise ValueError(f"window width T={T} is shorter than one time step")
    if T > (grid.n_t - 1) * grid.dt * (1 + 1e-12) or n_T > grid.n_t - 1:
        raise ValueError(f"window width T={T} exceeds the record length")
    if not math.isclose(ratio, n_T, rel_tol=1e-9, abs_tol=1e-9):
        warnings.warn(f"T/dt = {ratio:.6g} is not an integer; using n_T = {n_T}", stacklevel=2)
    q, rem = divmod(grid.n_t - 1, n_T)
    if rem == 0:
        return WindowGeometry(float(T), n_T, q, False, grid.n_t)
    return WindowGeometry(float(T), n_T, q + 1, True, grid.n_t)


def geometry_from_n_T(n_T: int, grid: TimeGrid) -> WindowGeometry:
    return make_geometry(n_T * grid.dt, grid)


@dataclass(frozen=True)
class WindowMatrices:
    """Stacked local windows; row ``i*n_W + j`` is window ``j`` of record ``i`` (0-based)."""

    U_tilde: np.ndarray
    Y_tilde: np.ndarray
    n_records: int
    n_W: int


def segment_array(X: np.ndarray, geo: WindowGeometry) -> np.ndarray:
    """``(n, N_t)`` trajectories to ``(n * n_W, n_T)`` windows, record-major."""
    X = np.atleast_2d(X)
    if X.shape[1] != geo.n_t:
        raise ValueError(f"trajectories have {X.shape[1]} samples, geometry expects {geo.n_t}")
    return X[:, geo.index].reshape(-1, geo.n_T)


def segment(ds: Dataset, geo: WindowGeometry) -> WindowMatrices:
    if len(ds) == 0:
        raise ValueError("cannot segment an empty dataset")
    if ds.grid.n_t != geo.n_t:
        raise ValueError("geometry was built for a different grid")
    return WindowMatrices(
        segment_array(ds.excitation, geo), segment_array(ds.response, geo), len(ds), geo.n_W
    )


def _check_features(ds: Dataset, geo: WindowGeometry, *features: np.ndarray):
    rows = len(ds) * geo.n_W
    for F in features:
        if F.ndim != 2 or F.shape[0] != rows:
            raise ValueError(
                f"feature matrix has shape {F.shape}, expected {rows} rows (N_ED * n_W)"
            )


def assemble_first_window_training(
    ds: Dataset, geo: WindowGeometry, features_u: np.ndarray, features_y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[xi_u,1 | u(t0) | y(t0) | theta]`` with targets ``xi_y,1``."""
    _check_features(ds, geo, features_u, features_y)
    Fu = features_u.reshape(len(ds), geo.n_W, -1)
    Fy = features_y.reshape(len(ds), geo.n_W, -1)
    X0 = np.hstack([Fu[:, 0], ds.excitation[:, :1], ds.response[:, :1], ds.theta])
    return X0, Fy[:, 0].copy()


def assemble_recursive_training(
    ds: Dataset, geo: WindowGeometry, features_u: np.ndarray, features_y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[xi_u,j | xi_u,j-1 | xi_y,j-1 | theta]`` with targets ``xi_y,j`` for ``j >= 2``."""
    _check_features(ds, geo, features_u, features_y)
    n, w = len(ds), geo.n_W
    Fu = features_u.reshape(n, w, -1)
    Fy = features_y.reshape(n, w, -1)
    m_u, m_y = Fu.shape[2], Fy.shape[2]
    if w < 2:
        return np.zeros((0, 2 * m_u + m_y + ds.n_s)), np.zeros((0, m_y))
    theta = np.repeat(ds.theta[:, None, :], w - 1, axis=1)
    X = np.concatenate([Fu[:, 1:], Fu[:, :-1], Fy[:, :-1], theta], axis=2)
    return X.reshape(n * (w - 1), -1), Fy[:, 1:].reshape(n * (w - 1), m_y)
