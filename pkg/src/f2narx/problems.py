"""Benchmark problems: random-input laws plus excitation and simulator callbacks.

A problem turns ``(theta, phi)`` samples into excitation and response
trajectories. ``theta`` always starts with ``(m, k, y0)`` of the Bouc-Wen
oscillator; the ground-motion variant appends ``(S0, c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, TimeGrid
from .excitation import (
    CloughPenzienSpec,
    SpectralWhiteNoiseSpec,
    WhiteNoiseSynthesizer,
    lognormal_from_moments,
    sample_ground_motion,
)
from .simulator import BoucWenParams, simulate_bouc_wen_safe


@dataclass
class BoucWenWhiteNoise:
    """Bouc-Wen oscillator under band-limited white noise.

    ``m ~ U(m_range)``, ``k ~ U(k_range)``, ``y0 ~ U(y0_range)`` and
    ``phi ~ N(0, I)`` of length ``2 * excitation.n_terms``.
    """

    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 0.004, 3001))
    excitation: SpectralWhiteNoiseSpec = field(default_factory=SpectralWhiteNoiseSpec)
    oscillator: BoucWenParams = field(default_factory=BoucWenParams)
    m_range: tuple[float, float] = (5.0e4, 7.0e4)
    k_range: tuple[float, float] = (4.0e6, 6.0e6)
    y0_range: tuple[float, float] = (-1.0e-2, 1.0e-2)

    def __post_init__(self):
        self._synth = None

    @property
    def n_s(self) -> int:
        return 3

    @property
    def n_phi(self) -> int:
        return self.excitation.n_phi

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        theta = np.column_stack(
            [
                rng.uniform(*self.m_range, size=n),
                rng.uniform(*self.k_range, size=n),
                rng.uniform(*self.y0_range, size=n),
            ]
        )
        phi = rng.standard_normal((n, self.n_phi))
        return theta, phi

    def initial_value(self, theta: np.ndarray) -> np.ndarray:
        """Initial displacement ``y0`` of each sample."""
        return np.atleast_2d(theta)[:, 2]

    def excite(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        if self._synth is None:
            self._synth = WhiteNoiseSynthesizer(self.excitation, self.grid)
        return self._synth(np.atleast_2d(phi))

    def respond(self, theta: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Responses and a success mask; failed rows are NaN."""
        theta = np.atleast_2d(theta)
        return simulate_bouc_wen_safe(
            theta[:, 0], theta[:, 1], theta[:, 2], np.atleast_2d(U), self.grid, self.oscillator
        )

    def generate(self, theta: np.ndarray, phi: np.ndarray, chunk: int = 2000) -> Dataset:
        """Simulate every record; raises if any simulation fails."""
        U = np.empty((len(theta), self.grid.n_t))
        Y = np.empty_like(U)
        for a in range(0, len(theta), chunk):
            sl = slice(a, a + chunk)
            U[sl] = self.excite(theta[sl], phi[sl])
            Y[sl], ok = self.respond(theta[sl], U[sl])
            if not ok.all():
                bad = a + int(np.argmin(ok))
                raise RuntimeError(f"simulation failed for record {bad}")
        return Dataset(self.grid, theta, phi, U, Y)


@dataclass
class BoucWenGroundMotion(BoucWenWhiteNoise):
    """Bouc-Wen oscillator under Clough-Penzien ground acceleration.

    ``S0`` is lognormal with the given mean and standard deviation of ``S0``
    itself; ``c`` (peak arrival) is uniform. ``phi`` holds the phases.
    """

    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 0.005, 9001))
    ground: CloughPenzienSpec = field(default_factory=CloughPenzienSpec)
    S0_mean: float = 1.5e-6
    S0_std: float = 1.5e-6
    c_range: tuple[float, float] = (1.0, 15.0)

    @property
    def n_s(self) -> int:
        return 5

    @property
    def n_phi(self) -> int:
        return self.ground.N

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        mu, sigma = lognormal_from_moments(self.S0_mean, self.S0_std)
        theta = np.column_stack(
            [
                rng.uniform(*self.m_range, size=n),
                rng.uniform(*self.k_range, size=n),
                rng.uniform(*self.y0_range, size=n),
                rng.lognormal(mu, sigma, size=n),
                rng.uniform(*self.c_range, size=n),
            ]
        )
        phi = rng.uniform(0.0, 2.0 * math.pi, size=(n, self.n_phi))
        return theta, phi

    def excite(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        phi = np.atleast_2d(phi)
        out = np.empty((len(theta), self.grid.n_t))
        for i, (th, ph) in enumerate(zip(theta, phi)):
            spec = replace(self.ground, S0=float(th[3]), c=float(th[4]))
            out[i] = sample_ground_motion(spec, ph, self.grid).values
        return out
