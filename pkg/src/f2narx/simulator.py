"""Ground-truth response generation: fixed-step RK4 and the Bouc-Wen oscillator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import TimeGrid, Trajectory


class SimulationError(RuntimeError):
    """The integrated state became non-finite."""

    def __init__(self, message: str, time: float, record: int | None = None):
        super().__init__(message)
        self.time = time
        self.record = record


def _as_forcing(forcing, grid: TimeGrid) -> np.ndarray:
    if isinstance(forcing, Trajectory):
        if forcing.grid != grid:
            raise ValueError("forcing trajectory is on a different grid")
        return forcing.values
    arr = np.asarray(forcing, dtype=np.float64)
    if arr.shape[-1] != grid.n_t:
        raise ValueError(f"forcing has {arr.shape[-1]} samples, grid has {grid.n_t}")
    return arr


def integrate_ode(
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    x0,
    grid: TimeGrid,
    forcing=None,
    observe: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Classical fixed-step RK4 on ``grid``.

    ``f(t, x, u)`` returns the state derivative; ``x`` may carry leading batch
    axes, in which case ``forcing`` has shape ``(*batch, n_t)``. Between grid
    instants the forcing is linearly interpolated, so the half-step value is
    the mean of the two neighbouring samples.

    Returns the history of ``observe(x)`` (default: the full state) with time
    along the first axis.
    """
    x = np.array(x0, dtype=np.float64)
    dt = grid.dt
    if forcing is None:
        u = np.zeros(x.shape[:-1] + (grid.n_t,)) if x.ndim > 1 else np.zeros(grid.n_t)
    else:
        u = _as_forcing(forcing, grid)
    observe = observe or (lambda s: s.copy())
    first = np.asarray(observe(x))
    hist = np.empty((grid.n_t,) + first.shape)
    hist[0] = first
    t = grid.t0
    u_now = u[..., 0]
    for j in range(grid.n_t - 1):
        u_next = u[..., j + 1]
        u_mid = 0.5 * (u_now + u_next)
        k1 = f(t, x, u_now)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1, u_mid)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2, u_mid)
        k4 = f(t + dt, x + dt * k3, u_next)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = grid.t0 + (j + 1) * dt
        u_now = u_next
        hist[j + 1] = observe(x)
    bad = ~np.isfinite(hist.reshape(grid.n_t, -1)).all(axis=1)
    if bad.any():
        j = int(np.argmax(bad))
        raise SimulationError(f"non-finite state at t={grid.t0 + j * dt:.6g}", grid.t0 + j * dt)
    return hist


@dataclass(frozen=True)
class BoucWenParams:
    """Single-degree-of-freedom Bouc-Wen oscillator.

    ``c`` defaults to 10 % of critical damping, ``0.1 * m * sqrt(k/m)``.
    """

    m: float = 6.0e4
    k: float = 5.0e6
    c: float | None = None
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    A: float = 1.0
    n: float = 3.0
    x_y: float = 0.04
    y0: float = 0.0

    def __post_init__(self):
        if self.m <= 0 or self.k <= 0 or self.x_y <= 0:
            raise ValueError("m, k and x_y must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.c is None:
            object.__setattr__(self, "c", 0.1 * self.m * math.sqrt(self.k / self.m))


def bouc_wen_rhs(m, c, k, alpha, beta, gamma, A, n, x_y):
    """State derivative for ``x = [y, v, z]`` (last axis); parameters broadcast over the batch."""

    def f(t, x, u):
        y, v, z = x[..., 0], x[..., 1], x[..., 2]
        az = np.abs(z)
        if n == 3:
            az_n1 = az * az
        else:
            az_n1 = az ** (n - 1)
        acc = u - (c * v + k * (alpha * y + (1.0 - alpha) * x_y * z)) / m
        zdot = (A * v - beta * np.abs(v) * az_n1 * z - gamma * v * az_n1 * az) / x_y
        return np.stack([v, acc, zdot], axis=-1)

    return f


def simulate_bouc_wen(p: BoucWenParams, u: Trajectory) -> Trajectory:
    """Displacement response of the oscillator to ground-type forcing ``m*u(t)``.

    Initial conditions: ``y(t0) = p.y0``, ``v(t0) = 0``, ``z(t0) = 0``.
    """
    f = bouc_wen_rhs(p.m, p.c, p.k, p.alpha, p.beta, p.gamma, p.A, p.n, p.x_y)
    y = integrate_ode(f, np.array([p.y0, 0.0, 0.0]), u.grid, u, observe=lambda s: s[0])
    return Trajectory(u.grid, y)


def simulate_bouc_wen_batch(
    m, k, y0, U: np.ndarray, grid: TimeGrid, base: BoucWenParams = BoucWenParams(), c=None
) -> np.ndarray:
    """Vectorised Bouc-Wen responses for many records.

    ``m``, ``k``, ``y0`` are length-``n`` arrays, ``U`` is ``(n, n_t)``. Damping
    follows ``0.1 * m * sqrt(k/m)`` unless ``c`` is given. Raises
    :class:`SimulationError` naming the first failing record.
    """
    m = np.asarray(m, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    if c is None:
        c = 0.1 * m * np.sqrt(k / m)
    f = bouc_wen_rhs(m, np.asarray(c), k, base.alpha, base.beta, base.gamma, base.A, base.n, base.x_y)
    x0 = np.zeros((U.shape[0], 3))
    x0[:, 0] = y0
    try:
        Y = integrate_ode(f, x0, grid, U, observe=lambda s: s[:, 0].copy())
    except SimulationError as err:
        raise SimulationError(str(err), err.time) from None
    return np.ascontiguousarray(Y.T)


def simulate_bouc_wen_safe(m, k, y0, U, grid, base: BoucWenParams = BoucWenParams()):
    """Like :func:`simulate_bouc_wen_batch` but returns ``(Y, ok)`` with failed rows NaN."""
    m = np.atleast_1d(np.asarray(m, dtype=np.float64))
    U = np.atleast_2d(U)
    try:
        return simulate_bouc_wen_batch(m, k, y0, U, grid, base), np.ones(len(m), dtype=bool)
    except SimulationError:
        pass
    Y = np.full((len(m), grid.n_t), np.nan)
    ok = np.zeros(len(m), dtype=bool)
    k = np.broadcast_to(k, m.shape)
    y0 = np.broadcast_to(y0, m.shape)
    for i in range(len(m)):
        try:
            Y[i] = simulate_bouc_wen_batch(m[i : i + 1], k[i : i + 1], y0[i : i + 1], U[i : i + 1], grid, base)[0]
            ok[i] = True
        except SimulationError:
            continue
    return Y, ok
