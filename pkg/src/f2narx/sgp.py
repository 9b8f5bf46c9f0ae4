"""Sparse variational GP regression with inducing inputs.

Training maximises the collapsed variational lower bound

    log N(y | 0, Qnn + s2n I) - tr(Knn - Qnn) / (2 s2n),  Qnn = Knu Kuu^-1 Kun

over kernel hyperparameters, noise and (optionally) the inducing inputs.
The bound and its gradient are evaluated with torch in float64; the fitted
model predicts with plain numpy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from scipy.cluster.vq import kmeans2
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize

from .gpr import (
    GPConfig,
    GPFitError,
    Normalizer,
    _bounds,
    _check_xy,
    _SEPredictor,
    fit_gp,
    robust_cholesky,
    sqdist,
)

logger = logging.getLogger(__name__)

_LOG2PI = math.log(2.0 * math.pi)


def default_n_inducing(n: int, cap: int = 256) -> int:
    return max(1, min(cap, math.ceil(n / 4)))


@dataclass(eq=False)
class SgpModel(_SEPredictor):
    """Fitted sparse GP. ``Z`` holds the inducing inputs in original units."""

    Z: np.ndarray
    norm: Normalizer
    log_lengthscales: np.ndarray
    log_signal_variance: float
    log_noise_variance: float
    X: np.ndarray
    y: np.ndarray
    kuu_jitter: float = 1e-8
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        ell = np.exp(self.log_lengthscales)
        sf2 = math.exp(self.log_signal_variance)
        sn2 = math.exp(self.log_noise_variance)
        Zs = self.norm.x(self.Z) / ell
        Xs = self.norm.x(self.X) / ell
        yn = self.norm.y(self.y)
        m = Zs.shape[0]
        Kuu = sf2 * np.exp(-0.5 * sqdist(Zs, Zs)) + self.kuu_jitter * sf2 * np.eye(m)
        L, _ = robust_cholesky(Kuu)
        # Accumulate A A^T and A y over row blocks to bound memory.
        AAT = np.zeros((m, m))
        Ay = np.zeros(m)
        for a in range(0, Xs.shape[0], 8192):
            Kuf = sf2 * np.exp(-0.5 * sqdist(Zs, Xs[a : a + 8192]))
            A = solve_triangular(L, Kuf, lower=True, check_finite=False)
            AAT += A @ A.T
            Ay += A @ yn[a : a + 8192]
        B = np.eye(m) + AAT / sn2
        LB = cholesky(0.5 * (B + B.T), lower=True, check_finite=False)
        c = solve_triangular(LB, Ay, lower=True, check_finite=False) / sn2
        self.centers = Zs
        self.L1 = L
        self.L2 = LB
        self.weights = solve_triangular(L.T, solve_triangular(LB.T, c, lower=False), lower=False)
        Linv = solve_triangular(L, np.eye(m), lower=True, check_finite=False)
        M = solve_triangular(LB, Linv, lower=True, check_finite=False)
        Q = Linv.T @ Linv - M.T @ M
        self.Q = 0.5 * (Q + Q.T)
        # Posterior over inducing outputs u: mean Kuu w, covariance L LB^-T LB^-1 L^T.
        self.q_mean = Kuu @ self.weights
        self.q_cov_factor = L @ solve_triangular(LB.T, np.eye(m), lower=False)

    @property
    def n_inducing(self) -> int:
        return self.Z.shape[0]


def _bound_torch(theta: torch.Tensor, Zflat: torch.Tensor, Xn, yn, m: int, jitter: float):
    n, p = Xn.shape
    ell = torch.exp(theta[:p])
    sf2 = torch.exp(theta[p])
    sn2 = torch.exp(theta[p + 1])
    Z = Zflat.reshape(m, p) / ell
    X = Xn / ell
    z2 = (Z * Z).sum(1)
    x2 = (X * X).sum(1)
    Kuu = sf2 * torch.exp(-0.5 * torch.clamp(z2[:, None] + z2[None, :] - 2.0 * Z @ Z.T, min=0.0))
    Kuu = Kuu + jitter * sf2 * torch.eye(m, dtype=Xn.dtype)
    Kuf = sf2 * torch.exp(-0.5 * torch.clamp(z2[:, None] + x2[None, :] - 2.0 * Z @ X.T, min=0.0))
    L = torch.linalg.cholesky(Kuu)
    A = torch.linalg.solve_triangular(L, Kuf, upper=False) / torch.sqrt(sn2)
    AAT = A @ A.T
    B = torch.eye(m, dtype=Xn.dtype) + AAT
    LB = torch.linalg.cholesky(B)
    c = torch.linalg.solve_triangular(LB, (A @ yn)[:, None], upper=False)[:, 0] / torch.sqrt(sn2)
    bound = (
        -0.5 * n * _LOG2PI
        - torch.log(torch.diagonal(LB)).sum()
        - 0.5 * n * torch.log(sn2)
        - 0.5 * (yn @ yn) / sn2
        + 0.5 * (c @ c)
        - 0.5 * n * sf2 / sn2
        + 0.5 * torch.trace(AAT)
    )
    return bound


def sgp_lower_bound(params: np.ndarray, Xn: np.ndarray, yn: np.ndarray, m: int, jitter: float = 1e-8,
                    with_grad: bool = True):
    """Negative collapsed bound and its gradient for ``params = [log l, log s2, log noise, Z.ravel()]``."""
    p = Xn.shape[1]
    t = torch.tensor(params, dtype=torch.float64, requires_grad=with_grad)
    Xt = torch.from_numpy(np.ascontiguousarray(Xn))
    yt = torch.from_numpy(np.ascontiguousarray(yn))
    try:
        with torch.set_grad_enabled(with_grad):
            val = -_bound_torch(t[: p + 2], t[p + 2 :], Xt, yt, m, jitter)
            if with_grad:
                val.backward()
    except (RuntimeError, torch.linalg.LinAlgError):
        return (np.inf, np.zeros_like(params)) if with_grad else np.inf
    fval = float(val.detach())
    if not np.isfinite(fval):
        return (np.inf, np.zeros_like(params)) if with_grad else np.inf
    if not with_grad:
        return fval
    return fval, t.grad.numpy().copy()


def init_inducing(Xn: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """k-means centroids of the normalised inputs; random rows as fallback."""
    n = Xn.shape[0]
    if m >= n:
        return Xn.copy()
    try:
        sample = Xn if n <= 20000 else Xn[rng.choice(n, 20000, replace=False)]
        centroids, labels = kmeans2(sample, m, minit="++", seed=rng, iter=10)
        if np.all(np.isfinite(centroids)) and len(np.unique(labels)) == m:
            return centroids
    except Exception as exc:  # noqa: BLE001 - any k-means failure falls back to a subset
        logger.debug("k-means initialisation failed: %s", exc)
    return Xn[rng.choice(n, m, replace=False)].copy()


def fit_sgp(X, y, n_inducing: int | None = None, cfg: GPConfig | None = None,
            inducing: np.ndarray | None = None, warm_start: SgpModel | None = None) -> SgpModel:
    """Fit a sparse variational GP.

    Hyperparameters are initialised from a multi-start exact GP on a random
    subset of at most ``cfg.init_subset`` rows, inducing inputs from k-means;
    then everything is refined jointly on the full data. Passing ``inducing``
    pins the inducing inputs to those rows. ``warm_start`` replaces the subset
    initialisation by the hyperparameters and inducing inputs of an earlier
    fit on related data (its inducing count wins over ``n_inducing``).
    """
    cfg = cfg or GPConfig()
    X, y = _check_xy(X, y)
    n, p = X.shape
    if n < 1:
        raise ValueError("need at least one training point")
    rng = np.random.default_rng(cfg.seed)
    norm = Normalizer.fit(X, y, cfg.normalize_y)
    Xn, yn = norm.x(X), norm.y(y)
    if warm_start is not None and inducing is None:
        if warm_start.Z.shape[1] != p:
            raise ValueError("warm-start model has a different input dimension")
        inducing_init = norm.x(warm_start.Z)
    else:
        inducing_init = None
    if inducing is not None:
        Z_pinned = np.atleast_2d(np.asarray(inducing, dtype=np.float64))
        Zn = norm.x(Z_pinned)
        optimize_z = False
    else:
        m = n_inducing or cfg.n_inducing or default_n_inducing(n, cfg.max_inducing)
        if inducing_init is not None:
            m = inducing_init.shape[0]
        if m > n:
            raise ValueError(f"n_inducing={m} exceeds the number of training points {n}")
        Zn = inducing_init if inducing_init is not None else init_inducing(Xn, m, rng)
        optimize_z = cfg.optimize_inducing
    m = Zn.shape[0]

    if warm_start is not None:
        hyp = np.concatenate(
            [warm_start.log_lengthscales, [warm_start.log_signal_variance, warm_start.log_noise_variance]]
        )
    else:
        sub = np.arange(n) if n <= cfg.init_subset else np.sort(rng.choice(n, cfg.init_subset, replace=False))
        gp0 = fit_gp(Xn[sub], yn[sub], replace(cfg, normalize_y=False))
        hyp = np.concatenate([gp0.log_lengthscales, [gp0.log_signal_variance, gp0.log_noise_variance]])
    bounds = _bounds(cfg, p)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    hyp = np.clip(hyp, lo, hi)

    if optimize_z:
        x0 = np.concatenate([hyp, Zn.ravel()])
        full_bounds = bounds + [(None, None)] * (m * p)

        def objective(v):
            return sgp_lower_bound(v, Xn, yn, m, cfg.kuu_jitter)
    else:
        x0 = hyp
        full_bounds = bounds
        zflat = Zn.ravel()

        def objective(v):
            f, g = sgp_lower_bound(np.concatenate([v, zflat]), Xn, yn, m, cfg.kuu_jitter)
            return f, g[: p + 2]

    # With Kuu jitter the trace term is ~ n * jitter * sf2 / sn2, which can
    # swamp the bound when the subset GP drove the noise to its floor; start
    # from the best of a few noise levels above the jitter scale.
    f0 = objective(x0)[0]
    for scale in (10.0, 100.0, 1000.0):
        ln = math.log(scale * cfg.kuu_jitter) + x0[p]
        if x0[p + 1] < ln <= hi[p + 1]:
            cand = x0.copy()
            cand[p + 1] = ln
            fc = objective(cand)[0]
            if fc < f0:
                x0, f0 = cand, fc
    if not np.isfinite(f0):
        raise GPFitError("variational bound is non-finite at the initial point")
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=full_bounds,
                   options={"maxiter": cfg.sgp_maxiter})
    best = res.x if (np.isfinite(res.fun) and res.fun <= f0) else x0
    if optimize_z:
        Zn = best[p + 2 :].reshape(m, p)
    model = SgpModel(
        Z=Z_pinned.copy() if inducing is not None else Zn * norm.x_std + norm.x_mean,
        norm=norm,
        log_lengthscales=best[:p].copy(),
        log_signal_variance=float(best[p]),
        log_noise_variance=float(best[p + 1]),
        X=X,
        y=y,
        kuu_jitter=cfg.kuu_jitter,
    )
    model.info = {"neg_bound": float(min(res.fun, f0)), "init_neg_bound": float(f0), "nit": int(res.nit)}
    return model


def predict_sgp(model: SgpModel, x_star):
    x_star = np.asarray(x_star, dtype=np.float64)
    mean, var = model.predict(np.atleast_2d(x_star))
    if x_star.ndim == 1:
        return float(mean[0]), float(var[0])
    return mean, var
