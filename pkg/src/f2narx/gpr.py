"""Exact Gaussian-process regression with an ARD squared-exponential kernel.

Inputs are standardised per column and outputs centred and scaled before
fitting; hyperparameters live in log space and are fit by multi-start
L-BFGS-B on the log marginal likelihood (analytic gradient).
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_LOG2PI = math.log(2.0 * math.pi)


class GPFitError(RuntimeError):
    pass


@dataclass
class GPConfig:
    """Training options shared by the exact and sparse regressors.

    Bounds apply to the normalised problem (standardised inputs, unit-variance
    outputs).
    """

    n_restarts: int = 4
    seed: int = 0
    maxiter: int = 500
    lengthscale_bounds: tuple[float, float] = (1e-2, 1e3)
    signal_variance_bounds: tuple[float, float] = (1e-6, 1e2)
    noise_variance_bounds: tuple[float, float] = (1e-8, 1.0)
    normalize_y: bool = True
    # sparse-only options
    n_inducing: int | None = None
    max_inducing: int = 256
    sgp_maxiter: int = 200
    optimize_inducing: bool = True
    init_subset: int = 500
    kuu_jitter: float = 1e-8


@dataclass(frozen=True)
class Kernel:
    """ARD squared exponential ``s2 * exp(-0.5 * sum((x - x')^2 / l^2))``."""

    signal_variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        if self.signal_variance <= 0 or np.any(np.asarray(self.lengthscales) <= 0):
            raise ValueError("kernel parameters must be positive")

    def __call__(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        return self.signal_variance * np.exp(-0.5 * sqdist(X1 / self.lengthscales, X2 / self.lengthscales))


def sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    D = A @ B.T
    D *= -2.0
    D += a2[:, None]
    D += b2[None, :]
    np.maximum(D, 0.0, out=D)
    return D


@dataclass(frozen=True)
class Normalizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, normalize_y: bool = True) -> "Normalizer":
        xm = X.mean(axis=0)
        xs = X.std(axis=0)
        xs = np.where(xs > 1e-12 * max(1.0, float(np.max(np.abs(X), initial=0.0))), xs, 1.0)
        if normalize_y:
            ym = float(y.mean())
            ys = float(y.std())
            if not ys > 1e-12 * max(1.0, abs(ym)):
                ys = 1.0
        else:
            ym, ys = 0.0, 1.0
        return cls(xm, xs, ym, ys)

    def x(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contain non-finite values")
    return X, y


def robust_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, climbing the jitter ladder on failure."""
    n = K.shape[0]
    for jitter in JITTER_LADDER:
        try:
            Kj = K if jitter == 0.0 else K + jitter * np.eye(n)
            return cholesky(Kj, lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    raise LinAlgError(f"Cholesky failed even with jitter {JITTER_LADDER[-1]}")


class _SEPredictor:
    """Shared prediction core: ``mean = k(x, C) @ w`` and a two-solve variance.

    ``var = s2 + noise - ||L1^-1 k||^2 + ||L2^-1 L1^-1 k||^2`` where the second
    term is absent for the exact GP. When ``Q`` is set the reduction is the
    quadratic form ``k^T Q k`` instead (one matrix product per block). Everything
    is in normalised units.
    """

    centers: np.ndarray  # normalised and divided by lengthscales
    log_lengthscales: np.ndarray
    log_signal_variance: float
    log_noise_variance: float
    weights: np.ndarray
    L1: np.ndarray
    L2: np.ndarray | None
    norm: Normalizer
    deterministic = False
    Q = None

    @property
    def kernel(self) -> Kernel:
        """Kernel in original input/output units."""
        return Kernel(
            math.exp(self.log_signal_variance) * self.norm.y_std**2,
            np.exp(self.log_lengthscales) * self.norm.x_std,
        )

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_variance) * self.norm.y_std**2

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    def _cross(self, X: np.ndarray) -> np.ndarray:
        Xs = (X - self.norm.x_mean) / (self.norm.x_std * np.exp(self.log_lengthscales))
        K = sqdist(Xs, self.centers)
        K *= -0.5
        np.exp(K, out=K)
        K *= math.exp(self.log_signal_variance)
        return K

    def predict(self, X, return_var: bool = True, chunk: int = 2048):
        """Predictive mean and variance (noise included) at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input columns, got {X.shape[1]}")
        n = X.shape[0]
        mean = np.empty(n)
        var = np.empty(n) if return_var else None
        prior = math.exp(self.log_signal_variance) + math.exp(self.log_noise_variance)
        for a in range(0, n, chunk):
            Ks = self._cross(X[a : a + chunk])
            mean[a : a + chunk] = Ks @ self.weights
            if return_var and self.Q is not None:
                red = np.einsum("ij,ij->i", Ks @ self.Q, Ks)
                var[a : a + chunk] = np.maximum(prior - red, 0.0)
            elif return_var:
                v = solve_triangular(self.L1, Ks.T, lower=True, check_finite=False)
                red = np.einsum("ij,ij->j", v, v)
                if self.L2 is not None:
                    v2 = solve_triangular(self.L2, v, lower=True, check_finite=False)
                    red -= np.einsum("ij,ij->j", v2, v2)
                var[a : a + chunk] = np.maximum(prior - red, 0.0)
        if return_var and self.deterministic:
            var[:] = 0.0
        mean = mean * self.norm.y_std + self.norm.y_mean
        if not return_var:
            return mean
        return mean, var * self.norm.y_std**2

    def predict_mean(self, X) -> np.ndarray:
        return self.predict(X, return_var=False)

    def deterministic_copy(self) -> "_SEPredictor":
        """Copy whose predictive variance is identically zero (mean unchanged)."""
        clone = copy.copy(self)
        clone.deterministic = True
        return clone


@dataclass(eq=False)
class GpModel(_SEPredictor):
    X: np.ndarray
    y: np.ndarray
    norm: Normalizer
    log_lengthscales: np.ndarray
    log_signal_variance: float
    log_noise_variance: float
    jitter: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        Xn = self.norm.x(self.X)
        yn = self.norm.y(self.y)
        ell = np.exp(self.log_lengthscales)
        self.centers = Xn / ell
        K = math.exp(self.log_signal_variance) * np.exp(-0.5 * sqdist(self.centers, self.centers))
        K[np.diag_indices_from(K)] += math.exp(self.log_noise_variance)
        self.L1, self.jitter = robust_cholesky(K)
        self.L2 = None
        self.weights = cho_solve((self.L1, True), yn, check_finite=False)

    def log_marginal_likelihood(self) -> float:
        yn = self.norm.y(self.y)
        return float(
            -0.5 * yn @ self.weights
            - np.log(np.diag(self.L1)).sum()
            - 0.5 * len(yn) * _LOG2PI
        )


def gp_neg_log_likelihood(params: np.ndarray, Xn: np.ndarray, yn: np.ndarray, with_grad: bool = True):
    """Negative log marginal likelihood of the normalised problem and its gradient.

    ``params = [log l_1..log l_p, log s2, log noise]``.
    """
    n, p = Xn.shape
    log_ell, log_sf2, log_sn2 = params[:p], params[p], params[p + 1]
    ell = np.exp(log_ell)
    sf2, sn2 = math.exp(log_sf2), math.exp(log_sn2)
    Xs = Xn / ell
    Kf = sf2 * np.exp(-0.5 * sqdist(Xs, Xs))
    K = Kf.copy()
    K[np.diag_indices(n)] += sn2
    try:
        L, _ = robust_cholesky(K)
    except LinAlgError:
        return (np.inf, np.zeros_like(params)) if with_grad else np.inf
    alpha = cho_solve((L, True), yn, check_finite=False)
    nll = 0.5 * yn @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * _LOG2PI
    if not with_grad:
        return nll
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = Kinv - np.outer(alpha, alpha)
    WK = W * Kf
    grad = np.empty_like(params)
    for d in range(p):
        diff = Xs[:, d : d + 1] - Xs[:, d : d + 1].T
        grad[d] = 0.5 * np.sum(WK * diff * diff)
    grad[p] = 0.5 * WK.sum()
    grad[p + 1] = 0.5 * sn2 * np.trace(W)
    return nll, grad


def _bounds(cfg: GPConfig, p: int) -> list[tuple[float, float]]:
    lo, hi = np.log(cfg.lengthscale_bounds)
    s_lo, s_hi = np.log(cfg.signal_variance_bounds)
    n_lo, n_hi = np.log(cfg.noise_variance_bounds)
    return [(lo, hi)] * p + [(s_lo, s_hi), (n_lo, n_hi)]


def initial_points(cfg: GPConfig, p: int, n_starts: int, rng: np.random.Generator) -> np.ndarray:
    bounds = np.array(_bounds(cfg, p))
    base = np.concatenate([np.full(p, math.log(math.sqrt(p))), [0.0, math.log(1e-2)]])
    pts = [base]
    for _ in range(max(n_starts - 1, 0)):
        pts.append(
            np.concatenate(
                [
                    base[:p] + rng.uniform(-math.log(10.0), math.log(10.0), p),
                    [rng.uniform(math.log(0.1), math.log(10.0)), rng.uniform(math.log(1e-6), math.log(1e-1))],
                ]
            )
        )
    return np.clip(np.array(pts), bounds[:, 0], bounds[:, 1])


def fit_gp(X, y, cfg: GPConfig | None = None) -> GpModel:
    """Fit an exact GP by maximising the log marginal likelihood from several starts."""
    cfg = cfg or GPConfig()
    X, y = _check_xy(X, y)
    if X.shape[0] < 1:
        raise ValueError("need at least one training point")
    norm = Normalizer.fit(X, y, cfg.normalize_y)
    Xn, yn = norm.x(X), norm.y(y)
    p = X.shape[1]
    rng = np.random.default_rng(cfg.seed)
    starts = initial_points(cfg, p, max(cfg.n_restarts, 1), rng)
    bounds = _bounds(cfg, p)
    best, best_val, init_vals = None, np.inf, []
    for x0 in starts:
        init_vals.append(gp_neg_log_likelihood(x0, Xn, yn, with_grad=False))
        try:
            res = minimize(
                gp_neg_log_likelihood,
                x0,
                args=(Xn, yn),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": cfg.maxiter},
            )
        except (LinAlgError, FloatingPointError, ValueError) as exc:
            logger.debug("GP restart failed: %s", exc)
            continue
        cand, val = res.x, res.fun
        # L-BFGS-B may return a worse point than it started from on failure.
        if not np.isfinite(val) or val > init_vals[-1]:
            cand, val = x0, init_vals[-1]
        if val < best_val:
            best, best_val = cand, val
    if best is None or not np.isfinite(best_val):
        raise GPFitError("log marginal likelihood is non-finite at every start")
    model = GpModel(X, y, norm, best[:p].copy(), float(best[p]), float(best[p + 1]))
    model.info = {"nll": float(best_val), "init_nll": [float(v) for v in init_vals]}
    return model


def predict_gp(model: _SEPredictor, x_star):
    """Predictive ``(mean, variance)``; scalars for one input vector, arrays for a matrix."""
    x_star = np.asarray(x_star, dtype=np.float64)
    mean, var = model.predict(np.atleast_2d(x_star))
    if x_star.ndim == 1:
        return float(mean[0]), float(var[0])
    return mean, var
