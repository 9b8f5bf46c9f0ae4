import math

import numpy as np
import pytest

from f2narx.gpr import GPConfig, GPFitError, fit_gp, gp_neg_log_likelihood, predict_gp


def test_constant_target():
    X = np.linspace(0, 1, 8)[:, None]
    gp = fit_gp(X, np.full(8, 3.25))
    mean, var = gp.predict(np.array([[0.3], [5.0]]))
    assert np.allclose(mean, 3.25, atol=1e-8)
    assert np.all(var <= 1e-6)


def test_noise_free_sine_interpolates():
    X = np.linspace(0, 2 * math.pi, 20)[:, None]
    y = np.sin(X[:, 0])
    gp = fit_gp(X, y)
    mean, var = gp.predict(X)
    assert np.max(np.abs(mean - y)) < 1e-4
    # Predictive variance includes the learned noise, which sits at its 1e-8 floor.
    floor = GPConfig().noise_variance_bounds[0] * gp.norm.y_std**2
    assert gp.noise_variance <= 1.01 * floor
    assert np.all(var <= 10 * floor)


def test_duplicate_rows_conflicting_targets():
    # Two identical inputs with targets a, b: the likelihood splits into a
    # common-mode term (signal) and a difference term whose optimum is
    # noise = ((a - b) / 2)^2.
    a, b = 1.0, -1.0
    gp = fit_gp(np.zeros((2, 1)), np.array([a, b]))
    assert gp.noise_variance >= ((a - b) / 2) ** 2 * 0.999
    m, _ = predict_gp(gp, np.zeros(1))
    assert m == pytest.approx((a + b) / 2, abs=1e-9)


def test_far_field_reverts_to_prior(rng):
    X = rng.uniform(-1, 1, (25, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    gp = fit_gp(X, y)
    far = gp.norm.x_mean + 10 * gp.norm.x_std * np.exp(gp.log_lengthscales) * 10
    m, v = predict_gp(gp, far)
    assert m == pytest.approx(gp.norm.y_mean, abs=1e-6 * gp.norm.y_std)
    assert v == pytest.approx(gp.kernel.signal_variance + gp.noise_variance, rel=0.01)


def test_one_point_closed_form():
    gp = fit_gp(np.array([[0.5, -1.0]]), np.array([2.0]))
    sf2, sn2 = gp.kernel.signal_variance, gp.noise_variance
    x = np.array([0.9, -0.2])
    r2 = np.sum(((x - gp.norm.x_mean) / gp.norm.x_std / np.exp(gp.log_lengthscales)) ** 2)
    k = sf2 * math.exp(-0.5 * r2)
    # Normalised target is zero, so the mean is the stored offset.
    m, v = predict_gp(gp, x)
    assert m == pytest.approx(2.0, abs=1e-12)
    assert v == pytest.approx(sf2 + sn2 - k * k / (sf2 + sn2), rel=1e-12)


def test_one_point_closed_form_nonzero_target():
    gp = fit_gp(np.array([[0.5]]), np.array([2.0]), GPConfig(normalize_y=False))
    sf2, sn2 = gp.kernel.signal_variance, gp.noise_variance
    x = np.array([0.8])
    k = sf2 * math.exp(-0.5 * (0.3 / np.exp(gp.log_lengthscales[0])) ** 2)
    m, v = predict_gp(gp, x)
    assert m == pytest.approx(k / (sf2 + sn2) * 2.0, rel=1e-12)
    assert v == pytest.approx(sf2 + sn2 - k * k / (sf2 + sn2), rel=1e-12)


def test_permutation_invariance(rng):
    X = rng.uniform(-2, 2, (30, 3))
    y = np.cos(X[:, 0]) * X[:, 1] + 0.1 * X[:, 2]
    a = fit_gp(X, y)
    perm = rng.permutation(30)
    b = fit_gp(X[perm], y[perm])
    Xt = rng.uniform(-2, 2, (50, 3))
    assert np.allclose(a.predict_mean(Xt), b.predict_mean(Xt), atol=1e-6 * np.std(y))


def test_optimum_beats_every_start(rng):
    X = rng.uniform(-2, 2, (40, 2))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(40)
    gp = fit_gp(X, y)
    assert gp.info["nll"] <= min(gp.info["init_nll"]) + 1e-12
    assert -gp.log_marginal_likelihood() == pytest.approx(gp.info["nll"], rel=1e-8)


def test_gradient_matches_finite_differences(rng):
    Xn = rng.standard_normal((25, 2))
    yn = rng.standard_normal(25)
    x = np.array([0.2, -0.1, 0.3, math.log(0.1)])
    _, g = gp_neg_log_likelihood(x, Xn, yn)
    h = 1e-5
    fd = [(gp_neg_log_likelihood(x + h * e, Xn, yn, False) - gp_neg_log_likelihood(x - h * e, Xn, yn, False)) / (2 * h)
          for e in np.eye(4)]
    assert np.allclose(g, fd, rtol=1e-4)


def test_deterministic_given_seed(rng):
    X = rng.uniform(-2, 2, (30, 2))
    y = X[:, 0] ** 2 + 0.05 * rng.standard_normal(30)
    a, b = fit_gp(X, y, GPConfig(seed=3)), fit_gp(X, y, GPConfig(seed=3))
    assert np.array_equal(a.log_lengthscales, b.log_lengthscales)


def test_variance_nonnegative_and_deterministic_copy(rng):
    X = rng.uniform(-1, 1, (20, 2))
    gp = fit_gp(X, X[:, 0] - X[:, 1])
    _, v = gp.predict(rng.uniform(-3, 3, (100, 2)))
    assert np.all(v >= 0)
    d = gp.deterministic_copy()
    m2, v2 = d.predict(X)
    assert np.all(v2 == 0) and np.array_equal(m2, gp.predict_mean(X))


def test_bad_input():
    with pytest.raises(ValueError):
        fit_gp(np.array([[0.0], [np.nan]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        fit_gp(np.zeros((3, 1)), np.zeros(2))
    assert issubclass(GPFitError, RuntimeError)
