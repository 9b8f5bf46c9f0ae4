"""Built-in oracle checks run by ``f2narx selfcheck``.

Each check returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np

from .data import TimeGrid
from .gpr import GPConfig, fit_gp, gp_neg_log_likelihood
from .pca import fit_pca, inverse_project, project
from .reliability import estimate_pf, first_passage_indicator
from .sgp import fit_sgp
from .simulator import BoucWenParams, simulate_bouc_wen_batch
from .ut import ut_variance


def check_gp_gradient(seed: int = 0, tol: float = 1e-4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 3))
    y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + 0.05 * rng.standard_normal(30)
    x = np.array([0.1, -0.3, 0.4, 0.2, math.log(0.05)])
    _, g = gp_neg_log_likelihood(x, X, y)
    h = 1e-5
    fd = np.array(
        [
            (gp_neg_log_likelihood(x + h * e, X, y, False) - gp_neg_log_likelihood(x - h * e, X, y, False)) / (2 * h)
            for e in np.eye(x.size)
        ]
    )
    err = float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)))
    return "gp-gradient", err < tol, f"max relative error {err:.2e}"


def check_sgp_pinned(seed: int = 0, n: int = 100, tol: float = 1e-3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (n, 2))
    y = np.sin(2 * X[:, 0]) * np.cos(X[:, 1]) + 0.01 * rng.standard_normal(n)
    gp = fit_gp(X, y)
    cfg = GPConfig(lengthscale_bounds=(1e-2, 1e3))
    sg = fit_sgp(X, y, cfg=cfg, inducing=X)
    # Compare at the exact GP's hyperparameters so only the approximation differs.
    from .sgp import SgpModel

    twin = SgpModel(X, gp.norm, gp.log_lengthscales, gp.log_signal_variance, gp.log_noise_variance, X, y,
                    kuu_jitter=cfg.kuu_jitter)
    Xt = rng.uniform(-2, 2, (200, 2))
    scale = float(np.std(y))
    err = float(np.max(np.abs(gp.predict_mean(Xt) - twin.predict_mean(Xt)))) / scale
    ok = err < tol and np.all(np.isfinite(sg.predict_mean(Xt)))
    return "sgp-pinned-vs-gp", bool(ok), f"max |mean diff| / scale {err:.2e}"


def check_ut_linear(tol: float = 1e-12):
    a = np.array([0.7, -1.3, 2.1, 0.4])
    S = np.array([0.3, 1.1, 0.05, 2.0])
    v = ut_variance(lambda X: X @ a, lambda X: np.zeros(len(X)), np.ones(4), np.diag(S))
    exact = float(np.sum(a**2 * S))
    err = abs(v - exact) / exact
    return "ut-linear", err < tol, f"relative error {err:.2e}"


def check_ut_vs_mcs(seed: int = 0, n_mc: int = 100_000, tol: float = 0.05):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (40, 3))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 - X[:, 2] + 0.05 * rng.standard_normal(40)
    gp = fit_gp(X, y)
    mu_x = np.array([0.2, -0.4, 0.3])
    Sx = np.array([0.04, 0.02, 0.03])
    ut = ut_variance(gp.predict_mean, lambda Z: gp.predict(Z)[1], mu_x, np.diag(Sx))
    Z = mu_x + np.sqrt(Sx) * rng.standard_normal((n_mc, 3))
    m, v = gp.predict(Z)
    mc = float(v.mean() + m.var())
    err = abs(ut - mc) / mc
    return "ut-vs-mcs", err < tol, f"relative difference {err:.2e}"


def observed_order(simulate, n_coarse: int, dt: float, u_coarse: np.ndarray, levels=(1, 2, 4, 8), ref_level=128):
    """Least-squares convergence order of ``simulate(u, grid)`` over step halvings.

    The forcing is piecewise linear on the coarsest grid, so every refinement
    integrates the same ODE. Errors are measured on the coarse instants
    against a run with ``dt / ref_level``.
    """
    t_coarse = np.arange(n_coarse) * dt
    sols = []
    for r in (*levels, ref_level):
        grid = TimeGrid(0.0, dt / r, (n_coarse - 1) * r + 1)
        sols.append(simulate(np.interp(grid.times, t_coarse, u_coarse), grid)[::r])
    errs = np.array([np.max(np.abs(s - sols[-1])) for s in sols[:-1]])
    slope = np.polyfit(np.log2(levels), np.log2(errs), 1)[0]
    return float(-slope)


def rk4_observed_order(n_coarse: int = 201, dt: float = 0.02, amplitude: float = 3.0, seed: int = 0) -> float:
    """Observed order of the Bouc-Wen simulator, three refinements of ``dt``.

    ``amplitude`` is the standard deviation of the random forcing samples,
    close to the pointwise std of the white-noise excitation (about 2.2).
    """
    rng = np.random.default_rng(seed)
    p = BoucWenParams()
    u = amplitude * rng.standard_normal(n_coarse)
    return observed_order(
        lambda uu, grid: simulate_bouc_wen_batch([p.m], [p.k], [0.005], uu[None, :], grid, p)[0], n_coarse, dt, u
    )


def check_rk4_order(min_order: float = 3.5):
    order = rk4_observed_order()
    return "rk4-order", order >= min_order, f"observed order {order:.2f}"


def check_pca_roundtrip(seed: int = 0, tol: float = 1e-8):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((50, 12)) @ rng.standard_normal((12, 12)) + 3.0
    p = fit_pca(M, 1.0)
    err = float(np.max(np.abs(inverse_project(p, project(p, M)) - M)))
    return "pca-roundtrip", err < tol, f"max error {err:.2e}"


def check_pf_counting(seed: int = 0):
    rng = np.random.default_rng(seed)
    Y = 0.1 * rng.standard_normal((500, 50))
    pf, _ = estimate_pf(Y, 0.3)
    count = 0
    for row in Y:
        count += int(any(abs(v) >= 0.3 for v in row))
    ok = pf == count / len(Y) and int(first_passage_indicator(Y, 0.3).sum()) == count
    return "pf-counting", bool(ok), f"pf {pf:.4f}, brute force {count / len(Y):.4f}"


def run_all(quick: bool = True):
    checks = [
        check_gp_gradient,
        check_sgp_pinned,
        check_ut_linear,
        lambda: check_ut_vs_mcs(n_mc=20_000 if quick else 100_000),
        check_rk4_order,
        check_pca_roundtrip,
        check_pf_counting,
    ]
    for c in checks:
        try:
            yield c()
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            yield getattr(c, "__name__", "check"), False, f"raised {type(exc).__name__}: {exc}"
