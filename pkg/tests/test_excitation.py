import math

import numpy as np
import pytest

from f2narx.data import TimeGrid
from f2narx.excitation import (
    CloughPenzienSpec,
    SpectralWhiteNoiseSpec,
    clough_penzien_psd,
    lognormal_from_moments,
    modulation,
    sample_ground_motion,
    sample_white_noise_excitation,
)

GRID = TimeGrid(0.0, 0.004, 3001)


def test_zero_phi_gives_zero_signal():
    spec = SpectralWhiteNoiseSpec()
    u = sample_white_noise_excitation(spec, np.zeros(spec.n_phi), GRID)
    assert np.all(u.values == 0.0)


def test_single_term_closed_form():
    spec = SpectralWhiteNoiseSpec()
    phi = np.zeros(spec.n_phi)
    phi[0] = 1.0
    u = sample_white_noise_excitation(spec, phi, GRID)
    amp = math.sqrt(2 * spec.S * spec.d_omega)
    assert u.values[0] == pytest.approx(amp, rel=1e-14)
    assert np.allclose(u.values, amp * np.cos(spec.d_omega * GRID.times), atol=1e-14)


def test_wrong_phi_length():
    with pytest.raises(ValueError):
        sample_white_noise_excitation(SpectralWhiteNoiseSpec(), np.zeros(7), GRID)


def test_pointwise_variance_matches_spectrum():
    # Var u(t) = 2 S dw * n_terms for standard normal phi; Monte-Carlo at fixed t.
    spec = SpectralWhiteNoiseSpec()
    rng = np.random.default_rng(0)
    t = 3.7
    w = spec.omegas
    phi = rng.standard_normal((200_000, spec.n_phi))
    amp = math.sqrt(2 * spec.S * spec.d_omega)
    u = amp * (phi[:, :500] @ np.cos(w * t) + phi[:, 500:] @ np.sin(w * t))
    expected = 2 * spec.S * spec.d_omega * spec.n_terms
    assert expected == pytest.approx(4.712, abs=1e-3)
    assert u.var() == pytest.approx(expected, rel=0.01)


def test_linearity_in_phi(rng):
    spec = SpectralWhiteNoiseSpec()
    phi = rng.standard_normal(spec.n_phi)
    a = sample_white_noise_excitation(spec, phi, GRID).values
    b = sample_white_noise_excitation(spec, -2.5 * phi, GRID).values
    assert np.allclose(b, -2.5 * a, rtol=1e-12, atol=1e-12)


def _psd_oracle(w, wg=15.0, zg=0.6, wf=1.5, zf=0.6, S0=1.5e-6):
    kt = (wg**4 + 4 * zg**2 * wg**2 * w**2) / ((wg**2 - w**2) ** 2 + 4 * zg**2 * wg**2 * w**2)
    hp = w**4 / ((wf**2 - w**2) ** 2 + 4 * zf**2 * wf**2 * w**2)
    return S0 * kt * hp


def test_psd_values():
    spec = CloughPenzienSpec()
    assert clough_penzien_psd(spec, 0.0) == 0.0
    assert clough_penzien_psd(spec, 15.0) == pytest.approx(_psd_oracle(15.0), rel=1e-12)
    assert clough_penzien_psd(spec, 1e4) < 1e-3 * clough_penzien_psd(spec, 15.0)
    w = np.linspace(0, 200, 1001)
    assert np.all(clough_penzien_psd(spec, w) >= 0)


def test_modulation_values():
    spec = CloughPenzienSpec(eta0=0.0, c=8.0)
    assert modulation(spec, 10.0, 8.0) == pytest.approx(1.0, rel=1e-14)
    assert modulation(CloughPenzienSpec(), 15.0, 0.0) == 0.0
    paper = CloughPenzienSpec(c=8.0)
    assert modulation(paper, 15.0, 8.0) == pytest.approx(math.exp(-0.15 * 8.0 / 45.0), rel=1e-12)
    with pytest.raises(ValueError):
        modulation(paper, 1.0, -0.1)


def test_ground_motion_zero_spectrum_and_origin(rng):
    grid = TimeGrid(0.0, 0.005, 801)
    ph = rng.uniform(0, 2 * math.pi, 1000)
    assert np.all(sample_ground_motion(CloughPenzienSpec(S0=0.0), ph, grid).values == 0.0)
    g = sample_ground_motion(CloughPenzienSpec(), ph, grid)
    assert g.values[0] == 0.0
    with pytest.raises(ValueError):
        sample_ground_motion(CloughPenzienSpec(), ph[:10], grid)


def test_ground_motion_phase_periodicity(rng):
    grid = TimeGrid(0.0, 0.005, 401)
    ph = rng.uniform(0, 2 * math.pi, 1000)
    a = sample_ground_motion(CloughPenzienSpec(), ph, grid).values
    ph2 = ph.copy()
    ph2[17] += 2 * math.pi
    b = sample_ground_motion(CloughPenzienSpec(), ph2, grid).values
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * np.abs(a).max())


def test_ground_motion_std_scales_with_sqrt_s0():
    grid = TimeGrid(0.0, 0.005, 1601)  # t up to 8 s, includes c = 8
    rng = np.random.default_rng(3)
    phases = rng.uniform(0, 2 * math.pi, (30, 1000))
    j = 1600
    lo = np.array([sample_ground_motion(CloughPenzienSpec(S0=1e-6), p, grid).values[j] for p in phases])
    hi = np.array([sample_ground_motion(CloughPenzienSpec(S0=4e-6), p, grid).values[j] for p in phases])
    # Same phases, so the ratio is deterministic and equal to sqrt(4).
    assert hi.std() / lo.std() == pytest.approx(2.0, rel=0.01)


def test_lognormal_from_moments():
    mu, sigma = lognormal_from_moments(1.5e-6, 1.5e-6)
    assert sigma == pytest.approx(math.sqrt(math.log(2.0)))
    assert math.exp(mu + sigma**2 / 2) == pytest.approx(1.5e-6, rel=1e-12)
