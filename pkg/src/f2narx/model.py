"""The F2NARX surrogate: training, mean and probabilistic prediction.

The response is cut into windows of ``n_T`` samples and every window is
summarised by PCA scores. Window 1 scores come from an exact-GP bank
``f0`` on ``[xi_u,1 | u(t0) | y(t0) | theta]``; later windows from a sparse-GP
bank ``f`` on ``[xi_u,j | xi_u,j-1 | xi_y,j-1 | theta]``, applied recursively.
"""

from __future__ import annotations

import copy
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import Dataset, TimeGrid, Trajectory
from .gpr import GPConfig, fit_gp
from .metrics import nmse_rows
from .pca import PcaProjector, fit_pca, inverse_covariance, inverse_project, inverse_variance, project
from .sgp import fit_sgp
from .ut import UT_COVARIANCES, diagonal_ut_weights, ut_kappa
from .windowing import (
    WindowGeometry,
    assemble_first_window_training,
    assemble_recursive_training,
    make_geometry,
    segment,
    segment_array,
)

logger = logging.getLogger(__name__)


class ModelCheckError(RuntimeError):
    """A freshly trained model produced non-finite predictions."""


@dataclass
class F2NarxConfig:
    """Training and prediction options.

    ``gp`` configures the first-window exact GPs, ``sgp`` the recursive sparse
    GPs. ``n_inducing=None`` uses ``min(sgp.max_inducing, ceil(n / 4))``.
    ``ut_covariance="full"`` carries the cross-covariance of the response
    features from window to window; ``"diagonal"`` keeps only their variances.
    """

    gp: GPConfig = field(default_factory=GPConfig)
    sgp: GPConfig = field(default_factory=GPConfig)
    n_inducing: int | None = None
    kappa_policy: str = "fixed"
    ut_covariance: str = "full"
    self_check: bool = True


@dataclass(eq=False)
class F2NarxModel:
    grid: TimeGrid
    geo: WindowGeometry
    pca_u: PcaProjector
    pca_y: PcaProjector
    f0_bank: list
    f_bank: list
    n_s: int
    kappa_policy: str = "fixed"
    ut_covariance: str = "full"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ut_covariance not in UT_COVARIANCES:
            raise ValueError(f"unknown ut_covariance {self.ut_covariance!r}; expected one of {UT_COVARIANCES}")
        if len(self.f0_bank) != self.m_y:
            raise ValueError(f"f0 bank has {len(self.f0_bank)} models, expected m_y={self.m_y}")
        if self.f_bank and len(self.f_bank) != self.m_y:
            raise ValueError(f"f bank has {len(self.f_bank)} models, expected m_y={self.m_y}")
        if not self.f_bank and self.geo.n_W > 1:
            raise ValueError("recursive bank is empty but the geometry has more than one window")

    @property
    def m_u(self) -> int:
        return self.pca_u.m

    @property
    def m_y(self) -> int:
        return self.pca_y.m

    @property
    def f0_input_dim(self) -> int:
        return self.m_u + 2 + self.n_s

    @property
    def f_input_dim(self) -> int:
        return 2 * self.m_u + self.m_y + self.n_s

    def deterministic_copy(self) -> "F2NarxModel":
        """Same mean chain, with every regressor reporting zero variance."""
        clone = copy.copy(self)
        clone.f0_bank = [g.deterministic_copy() for g in self.f0_bank]
        clone.f_bank = [g.deterministic_copy() for g in self.f_bank]
        return clone


@dataclass(frozen=True)
class ProbabilisticPrediction:
    """Mean and pointwise variance; 1-d for one record, ``(n, N_t)`` for a batch."""

    grid: TimeGrid
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def trajectories(self) -> tuple[Trajectory, Trajectory]:
        if self.mean.ndim != 1:
            raise ValueError("trajectories() is only defined for a single record")
        return Trajectory(self.grid, self.mean), Trajectory(self.grid, self.variance)


# --------------------------------------------------------------------------- training


def train(ds: Dataset, T: float, eps_lambda: float, cfg: F2NarxConfig | None = None,
          warm_start: F2NarxModel | None = None) -> F2NarxModel:
    """Fit projectors and both GP banks on ``ds``.

    ``warm_start`` seeds the sparse GPs with the hyperparameters and inducing
    inputs of an earlier model whose feature dimensions match.
    """
    cfg = cfg or F2NarxConfig()
    ut_kappa(1, cfg.kappa_policy)  # validates the policy name early
    if cfg.ut_covariance not in UT_COVARIANCES:
        raise ValueError(f"unknown ut_covariance {cfg.ut_covariance!r}; expected one of {UT_COVARIANCES}")
    if len(ds) < 1:
        raise ValueError("training set is empty")
    t_start = time.perf_counter()
    geo = make_geometry(T, ds.grid)
    W = segment(ds, geo)
    pca_u = fit_pca(W.U_tilde, eps_lambda)
    pca_y = fit_pca(W.Y_tilde, eps_lambda)
    Fu = project(pca_u, W.U_tilde)
    Fy = project(pca_y, W.Y_tilde)
    X0, T0 = assemble_first_window_training(ds, geo, Fu, Fy)
    X1, T1 = assemble_recursive_training(ds, geo, Fu, Fy)

    f0_bank = [fit_gp(X0, T0[:, k], replace(cfg.gp, seed=cfg.gp.seed + k)) for k in range(pca_y.m)]
    f_bank = []
    if geo.n_W > 1:
        reuse = (
            warm_start is not None
            and warm_start.f_bank
            and warm_start.m_y == pca_y.m
            and warm_start.f_input_dim == X1.shape[1]
        )
        for k in range(pca_y.m):
            f_bank.append(
                fit_sgp(
                    X1,
                    T1[:, k],
                    n_inducing_for(X1.shape[0], cfg),
                    replace(cfg.sgp, seed=cfg.sgp.seed + k),
                    warm_start=warm_start.f_bank[k] if reuse else None,
                )
            )
    model = F2NarxModel(ds.grid, geo, pca_u, pca_y, f0_bank, f_bank, ds.n_s, cfg.kappa_policy, cfg.ut_covariance)
    model.info = {
        "train_seconds": time.perf_counter() - t_start,
        "n_records": len(ds),
        "rows_f0": int(X0.shape[0]),
        "rows_f": int(X1.shape[0]),
    }
    if cfg.self_check:
        y = predict_mean_batch(model, ds.theta[:1], ds.excitation[:1], ds.response[:1, 0])
        if not np.all(np.isfinite(y)):
            raise ModelCheckError("trained model predicts non-finite values on a training record")
    return model


# --------------------------------------------------------------------------- prediction


def _prepare(model: F2NarxModel, theta, U, y0):
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    y0 = np.asarray(y0, dtype=np.float64).reshape(-1)
    n = U.shape[0]
    if U.shape[1] != model.grid.n_t:
        raise ValueError(f"excitation has {U.shape[1]} samples, the model grid has {model.grid.n_t}")
    if theta.shape != (n, model.n_s):
        raise ValueError(f"theta must have shape ({n}, {model.n_s}), got {theta.shape}")
    if y0.shape != (n,):
        raise ValueError(f"y0 must have {n} entries, got {y0.shape}")
    Fu = project(model.pca_u, segment_array(U, model.geo)).reshape(n, model.geo.n_W, model.m_u)
    return theta, U, y0, Fu


def _bank_mean(bank, X) -> np.ndarray:
    return np.column_stack([g.predict(X, return_var=False) for g in bank])


def _bank_mean_var(bank, X) -> tuple[np.ndarray, np.ndarray]:
    out = [g.predict(X) for g in bank]
    return np.column_stack([o[0] for o in out]), np.column_stack([o[1] for o in out])


def _first_inputs(Fu, U, y0, theta) -> np.ndarray:
    return np.hstack([Fu[:, 0], U[:, :1], y0[:, None], theta])


def _recursive_inputs(Fu, j, xi_prev, theta) -> np.ndarray:
    return np.hstack([Fu[:, j], Fu[:, j - 1], xi_prev, theta])


def _stitch(model: F2NarxModel, windows: np.ndarray, first: np.ndarray) -> np.ndarray:
    """``(n, n_W, n_T)`` window values to ``(n, N_t)``; the last window wins on overlap."""
    n = windows.shape[0]
    idx = model.geo.index
    out = np.empty((n, model.grid.n_t))
    out[:, 0] = first
    out[:, idx[:-1].ravel()] = windows[:, :-1].reshape(n, -1)
    out[:, idx[-1]] = windows[:, -1]
    return out


def predict_mean_batch(model: F2NarxModel, theta, U, y0) -> np.ndarray:
    """Autoregressive mean prediction for a batch; returns ``(n, N_t)``."""
    theta, U, y0, Fu = _prepare(model, theta, U, y0)
    n, n_W = U.shape[0], model.geo.n_W
    xi = np.empty((n, n_W, model.m_y))
    xi[:, 0] = _bank_mean(model.f0_bank, _first_inputs(Fu, U, y0, theta))
    for j in range(1, n_W):
        xi[:, j] = _bank_mean(model.f_bank, _recursive_inputs(Fu, j, xi[:, j - 1], theta))
    return _stitch(model, inverse_project(model.pca_y, xi), y0)


def predict_mean(model: F2NarxModel, theta, u, y0: float) -> Trajectory:
    """Mean prediction of one record."""
    values = u.values if isinstance(u, Trajectory) else u
    if isinstance(u, Trajectory) and u.grid != model.grid:
        raise ValueError("excitation grid differs from the model grid")
    y = predict_mean_batch(model, np.atleast_2d(theta), np.atleast_2d(values), [y0])
    return Trajectory(model.grid, y[0])


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    """Symmetric square roots of a stack of ``(m, m)`` covariances; negative modes are dropped."""
    w, Q = np.linalg.eigh(C)
    return Q * np.sqrt(np.clip(w, 0.0, None))[:, None, :]


def predict_probabilistic_batch(model: F2NarxModel, theta, U, y0) -> ProbabilisticPrediction:
    """Mean and variance with sigma-point propagation of the feature uncertainty.

    Only the previous response features are uncertain in the recursive inputs,
    so the sigma points spread along those ``m_y`` coordinates; points along
    the remaining coordinates coincide with the centre and are folded into its
    weight. With ``ut_covariance="full"`` the spread directions are the columns
    of a square root of the full feature covariance and the same sigma points
    give the cross-covariance of the next window's features. The GP banks are
    independent, so posterior variances only enter the diagonal.
    """
    theta, U, y0, Fu = _prepare(model, theta, U, y0)
    n, n_W, m_y, m_u = U.shape[0], model.geo.n_W, model.m_y, model.m_u
    full = model.ut_covariance == "full"
    diag = np.arange(m_y)
    xi = np.empty((n, n_W, m_y))
    C = np.zeros((n, n_W, m_y, m_y))
    xi[:, 0], C[:, 0, diag, diag] = _bank_mean_var(model.f0_bank, _first_inputs(Fu, U, y0, theta))
    if n_W > 1:
        p = model.f_input_dim
        kappa = ut_kappa(p, model.kappa_policy)
        w0, wi = diagonal_ut_weights(p, m_y, kappa)
        scale = p + kappa
        off = 2 * m_u
    for j in range(1, n_W):
        X = _recursive_inputs(Fu, j, xi[:, j - 1], theta)
        mu0, var0 = _bank_mean_var(model.f_bank, X)
        if full:
            A = _psd_sqrt(scale * C[:, j - 1])  # (n, m_y, m_y), columns are spread directions
        else:
            A = np.zeros((n, m_y, m_y))
            A[:, diag, diag] = np.sqrt(scale * C[:, j - 1, diag, diag])
        # Sigma points: rows ordered (sign, direction, record).
        S = np.broadcast_to(X, (2, m_y, n, p)).copy()
        for k in range(m_y):
            S[0, k, :, off:off + m_y] += A[:, :, k]
            S[1, k, :, off:off + m_y] -= A[:, :, k]
        muS, varS = _bank_mean_var(model.f_bank, S.reshape(-1, p))
        D = muS.reshape(2, m_y, n, m_y) - mu0
        varS = varS.reshape(2, m_y, n, m_y)
        total = w0 * var0 + wi * np.sum(varS + D**2, axis=(0, 1))
        if full:
            C[:, j] = wi * np.einsum("skna,sknb->nab", D, D)
        C[:, j, diag, diag] = np.maximum(total, 0.0)
        xi[:, j] = mu0
    mean = _stitch(model, inverse_project(model.pca_y, xi), y0)
    if full:
        win_var = inverse_covariance(model.pca_y, C)
    else:
        win_var = inverse_variance(model.pca_y, C[:, :, diag, diag])
    var = _stitch(model, win_var, np.zeros(n))
    return ProbabilisticPrediction(model.grid, mean, np.maximum(var, 0.0))


def predict_probabilistic(model: F2NarxModel, theta, u, y0: float) -> ProbabilisticPrediction:
    values = u.values if isinstance(u, Trajectory) else u
    if isinstance(u, Trajectory) and u.grid != model.grid:
        raise ValueError("excitation grid differs from the model grid")
    pred = predict_probabilistic_batch(model, np.atleast_2d(theta), np.atleast_2d(values), [y0])
    return ProbabilisticPrediction(model.grid, pred.mean[0], pred.variance[0])


def mcs_variance_oracle(
    model: F2NarxModel,
    theta,
    U,
    y0,
    n_samples: int,
    rng: np.random.Generator | int | None = None,
    max_rows: int = 20000,
) -> ProbabilisticPrediction:
    """Monte-Carlo propagation reference for the predictive mean and variance.

    Every rollout draws each window's features from the per-feature posterior
    Gaussians (noise included) and feeds the draws forward.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = np.random.default_rng(rng)
    theta, U, y0, Fu = _prepare(model, theta, U, y0)
    n, n_W, n_T, _m_y = U.shape[0], model.geo.n_W, model.geo.n_T, model.m_y
    win_mean = np.empty((n, n_W, n_T))
    win_var = np.empty((n, n_W, n_T))
    per_chunk = max(1, max_rows // n_samples)
    for a in range(0, n, per_chunk):
        b = min(a + per_chunk, n)
        r = np.repeat(np.arange(a, b), n_samples)
        th, Fr = theta[r], Fu[r]
        mu, var = _bank_mean_var(model.f0_bank, _first_inputs(Fr, U[r], y0[r], th))
        xi = mu + np.sqrt(var) * rng.standard_normal(mu.shape)
        for j in range(n_W):
            if j > 0:
                mu, var = _bank_mean_var(model.f_bank, _recursive_inputs(Fr, j, xi, th))
                xi = mu + np.sqrt(var) * rng.standard_normal(mu.shape)
            R = inverse_project(model.pca_y, xi).reshape(b - a, n_samples, n_T)
            win_mean[a:b, j] = R.mean(axis=1)
            win_var[a:b, j] = R.var(axis=1, ddof=1)
    mean = _stitch(model, win_mean, y0)
    var = _stitch(model, win_var, np.zeros(n))
    return ProbabilisticPrediction(model.grid, mean, var)


# --------------------------------------------------------------------------- selection


@dataclass(frozen=True)
class SelectionResult:
    T: float
    eps_lambda: float
    scores: dict

    def __iter__(self):
        return iter((self.T, self.eps_lambda))


def select_hyperparameters(
    ds: Dataset,
    T_grid: Sequence[float],
    eps_grid: Sequence[float],
    k_folds: int = 5,
    cfg: F2NarxConfig | None = None,
    seed: int = 0,
) -> SelectionResult:
    """k-fold cross-validation over ``(T, eps_lambda)`` pairs on out-of-fold mean NMSE.

    Ties go to the smaller ``T`` and then the larger ``eps_lambda``. Pairs
    that fail to train are skipped with a warning.
    """
    if not T_grid or not eps_grid:
        raise ValueError("hyperparameter grids must be non-empty")
    if k_folds < 2 or k_folds > len(ds):
        raise ValueError(f"k_folds must lie in [2, {len(ds)}]")
    perm = np.random.default_rng(seed).permutation(len(ds))
    folds = np.array_split(perm, k_folds)
    scores: dict = {}
    for T in T_grid:
        for eps in eps_grid:
            errs = []
            try:
                for f in range(k_folds):
                    test = folds[f]
                    tr = np.sort(np.concatenate([folds[g] for g in range(k_folds) if g != f]))
                    m = train(ds.subset(tr), T, eps, cfg)
                    held = ds.subset(test)
                    Yh = predict_mean_batch(m, held.theta, held.excitation, held.response[:, 0])
                    errs.append(nmse_rows(held.response, Yh))
            except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
                warnings.warn(f"skipping T={T}, eps={eps}: {exc}", stacklevel=2)
                continue
            scores[(float(T), float(eps))] = float(np.mean(np.concatenate(errs)))
    if not scores:
        raise RuntimeError("no hyperparameter pair could be trained")
    best = min(scores, key=lambda k: (scores[k], k[0], -k[1]))
    return SelectionResult(best[0], best[1], scores)


# --------------------------------------------------------------------------- helpers


def evaluate_nmse(model: F2NarxModel, ds: Dataset) -> np.ndarray:
    """Per-record NMSE of the mean prediction on ``ds``."""
    Yh = predict_mean_batch(model, ds.theta, ds.excitation, ds.response[:, 0])
    return nmse_rows(ds.response, Yh)


def n_inducing_for(n_rows: int, cfg: F2NarxConfig) -> int:
    if cfg.n_inducing is not None:
        return min(cfg.n_inducing, n_rows)
    return max(1, min(cfg.sgp.max_inducing, math.ceil(n_rows / 4)))
