import numpy as np
import pytest

from f2narx.gpr import fit_gp
from f2narx.ut import diagonal_ut_weights, sigma_points, ut_kappa, ut_variance


def test_linear_mean_exact():
    a = np.array([0.5, -2.0, 1.5])
    S = np.array([0.2, 0.7, 1.3])
    v = ut_variance(lambda X: X @ a, lambda X: np.zeros(len(X)), np.zeros(3), np.diag(S))
    assert v == pytest.approx(np.sum(a**2 * S), rel=1e-12)


def test_quadratic_mean_hand_computed():
    # f(x) = x^2, x ~ N(m, s), p + kappa = 3: points m, m +- sqrt(3 s) with weights 2/3, 1/6, 1/6.
    # Squared deviations are taken from f(m), giving 4 m^2 s + 3 s^2
    # (the weighted-mean form would give the exact 4 m^2 s + 2 s^2).
    m, s = 0.7, 0.3
    v = ut_variance(lambda X: X[:, 0] ** 2, lambda X: np.zeros(len(X)), np.array([m]), np.array([[s]]))
    assert v == pytest.approx(4 * m * m * s + 3 * s * s, rel=1e-12)


def test_zero_covariance_reduces_to_gp_variance(rng):
    X = rng.uniform(-1, 1, (15, 2))
    gp = fit_gp(X, np.sin(X[:, 0]) + X[:, 1])
    x = np.array([0.1, 0.2])
    v = ut_variance(gp.predict_mean, lambda Z: gp.predict(Z)[1], x, np.zeros((2, 2)))
    assert v == pytest.approx(gp.predict(x[None])[1][0], rel=1e-12)


def test_matches_monte_carlo(rng):
    X = rng.uniform(-2, 2, (40, 3))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 - X[:, 2] + 0.05 * rng.standard_normal(40)
    gp = fit_gp(X, y)
    mu = np.array([0.2, -0.4, 0.3])
    S = np.array([0.04, 0.02, 0.03])
    ut = ut_variance(gp.predict_mean, lambda Z: gp.predict(Z)[1], mu, np.diag(S))
    Z = mu + np.sqrt(S) * rng.standard_normal((100_000, 3))
    m, v = gp.predict(Z)
    assert ut == pytest.approx(v.mean() + m.var(), rel=0.05)


def test_sigma_points_reproduce_moments(rng):
    A = rng.standard_normal((4, 4))
    S = A @ A.T + 0.1 * np.eye(4)
    mu = rng.standard_normal(4)
    P, w = sigma_points(mu, S, kappa=3 - 4)
    assert P.shape == (9, 4) and w.sum() == pytest.approx(1.0)
    assert np.allclose(w @ P, mu)
    D = P - mu
    assert np.allclose((w[:, None] * D).T @ D, S)


def test_kappa_policies():
    assert ut_kappa(10) == -7
    with pytest.warns(UserWarning):
        assert ut_kappa(10, "clamped") == 0
    with pytest.raises(ValueError):
        ut_kappa(2, "other")


def test_diagonal_weights_fold_zero_spread():
    p, kappa = 6, -3.0
    w0, wi = diagonal_ut_weights(p, 2, kappa)
    assert w0 + 2 * 2 * wi == pytest.approx(1.0)
    assert wi == pytest.approx(1 / (2 * (p + kappa)))


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        ut_variance(lambda X: X[:, 0], lambda X: np.zeros(len(X)), np.zeros(2), np.diag([1.0, -1.0]))
