"""Stochastic excitation synthesis by spectral representation.

Two models are provided:

* band-limited white noise with ``n_terms`` cosine and ``n_terms`` sine
  components driven by standard-normal coefficients ``phi``;
* a Clough-Penzien ground acceleration with a time-frequency modulation
  envelope, driven by uniform random phases.

Random inputs are always passed in explicitly, so every function here is a
pure map from ``phi`` (or phases) to a trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TimeGrid, Trajectory


@dataclass(frozen=True)
class SpectralWhiteNoiseSpec:
    S: float = 0.05
    n_terms: int = 500
    d_omega: float = 30.0 * math.pi / 1000.0

    def __post_init__(self):
        if self.S <= 0:
            raise ValueError("S must be positive")
        if self.d_omega <= 0:
            raise ValueError("d_omega must be positive")
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")

    @property
    def n_phi(self) -> int:
        return 2 * self.n_terms

    @property
    def omegas(self) -> np.ndarray:
        return self.d_omega * np.arange(1, self.n_terms + 1)


@dataclass(frozen=True)
class CloughPenzienSpec:
    omega_g: float = 15.0
    zeta_g: float = 0.6
    omega_f: float = 1.5
    zeta_f: float = 0.6
    S0: float = 1.5e-6
    eta0: float = 0.15
    Tg: float = 45.0
    c: float = 8.0
    r: float = 2.0
    omega_u: float = 50.0 * math.pi
    N: int = 1000

    def __post_init__(self):
        for name in ("omega_g", "omega_f", "Tg", "c", "omega_u"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("zeta_g", "zeta_f"):
            if not 0 < getattr(self, name) < 2:
                raise ValueError(f"{name} must lie in (0, 2)")
        if self.S0 < 0:
            raise ValueError("S0 must be non-negative")
        if self.c > self.Tg:
            raise ValueError("peak arrival time c must not exceed Tg")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def d_omega(self) -> float:
        return self.omega_u / self.N

    @property
    def omegas(self) -> np.ndarray:
        return self.d_omega * np.arange(1, self.N + 1)


def _basis(omegas: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    arg = np.outer(omegas, times)
    return np.cos(arg), np.sin(arg)


class WhiteNoiseSynthesizer:
    """Caches the cosine/sine basis for repeated synthesis on one grid."""

    def __init__(self, spec: SpectralWhiteNoiseSpec, grid: TimeGrid):
        self.spec = spec
        self.grid = grid
        self._cos, self._sin = _basis(spec.omegas, grid.times)
        self._amp = math.sqrt(2.0 * spec.S * spec.d_omega)

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        """Excitations for a batch ``phi`` of shape ``(n, 2*n_terms)`` (or one vector)."""
        phi = np.asarray(phi, dtype=np.float64)
        k = self.spec.n_terms
        if phi.shape[-1] != 2 * k:
            raise ValueError(f"phi must have length {2 * k}, got {phi.shape[-1]}")
        return self._amp * (phi[..., :k] @ self._cos + phi[..., k:] @ self._sin)


def sample_white_noise_excitation(
    spec: SpectralWhiteNoiseSpec, phi: np.ndarray, grid: TimeGrid
) -> Trajectory:
    """``u(t) = sqrt(2 S dw) * sum_i [phi_i cos(w_i t) + phi_{i+n} sin(w_i t)]``."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 1 or phi.size != spec.n_phi:
        raise ValueError(f"phi must be a vector of length {spec.n_phi}")
    return Trajectory(grid, WhiteNoiseSynthesizer(spec, grid)(phi))


def clough_penzien_psd(spec: CloughPenzienSpec, omega):
    """Clough-Penzien power spectral density (soil filter times high-pass filter times S0)."""
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    wg, zg, wf, zf = spec.omega_g, spec.zeta_g, spec.omega_f, spec.zeta_f
    w2 = w * w
    soil = (wg**4 + 4.0 * zg**2 * wg**2 * w2) / ((wg**2 - w2) ** 2 + (2.0 * zg * wg * w) ** 2)
    high_pass = w2 * w2 / ((wf**2 - w2) ** 2 + (2.0 * zf * wf * w) ** 2)
    out = soil * high_pass * spec.S0
    return float(out) if out.ndim == 0 else out


def modulation(spec: CloughPenzienSpec, omega, t):
    """Time-frequency envelope ``exp(-eta0 w t / (wg Tg)) * [(t/c) exp(1 - t/c)]^r``."""
    w = np.asarray(omega, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    decay = np.exp(-spec.eta0 * w * t / (spec.omega_g * spec.Tg))
    shape = ((t / spec.c) * np.exp(1.0 - t / spec.c)) ** spec.r
    out = decay * shape
    return float(out) if out.ndim == 0 else out


def sample_ground_motion(
    spec: CloughPenzienSpec, phases: np.ndarray, grid: TimeGrid
) -> Trajectory:
    """Modulated spectral-representation ground acceleration on ``grid``.

    ``a(t) = sqrt(2) * sum_i sqrt(2 A(w_i,t)^2 S(w_i) dw) cos(w_i t + phase_i)``
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim != 1 or phases.size != spec.N:
        raise ValueError(f"expected {spec.N} phases, got shape {phases.shape}")
    t = grid.times
    if np.any(t < 0):
        raise ValueError("ground motion is defined for t >= 0 only")
    w = spec.omegas
    psd = clough_penzien_psd(spec, w)
    out = np.empty(grid.n_t)
    # Chunk over time to keep the (N x chunk) temporaries small.
    step = 512
    for a in range(0, grid.n_t, step):
        tt = t[a : a + step]
        env = modulation(spec, w[:, None], tt[None, :])
        amp = np.sqrt(2.0 * env**2 * psd[:, None] * spec.d_omega)
        out[a : a + step] = math.sqrt(2.0) * np.sum(
            amp * np.cos(w[:, None] * tt[None, :] + phases[:, None]), axis=0
        )
    return Trajectory(grid, out)


def lognormal_from_moments(mean: float, std: float) -> tuple[float, float]:
    """Underlying normal ``(mu, sigma)`` of a lognormal with the given mean and std."""
    if mean <= 0 or std <= 0:
        raise ValueError("lognormal mean and std must be positive")
    s2 = math.log1p((std / mean) ** 2)
    return math.log(mean) - 0.5 * s2, math.sqrt(s2)
