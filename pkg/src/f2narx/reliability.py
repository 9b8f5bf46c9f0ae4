"""First-passage failure probability by surrogate Monte Carlo, with active learning.

The active-learning loop trains the surrogate on a small design, predicts the
whole Monte-Carlo pool, and repeatedly adds the pool member with the smallest
double-sided ``U_min`` score until the sampling budget is spent. Afterwards the
pool is enlarged until the estimator's coefficient of variation is small
enough (or the pool cap is reached).
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .model import F2NarxConfig, F2NarxModel, predict_mean_batch, predict_probabilistic_batch, train

logger = logging.getLogger(__name__)

STRATEGIES = ("active", "random")


@dataclass
class ReliabilityConfig:
    """Options of the active-learning study.

    ``eval_every`` thins the retrain/estimate cycle of the random strategy
    (selection there does not need the model); the active strategy always
    retrains after every addition.
    """

    y_th: float = 0.14
    n_pool: int = 10_000
    n_initial: int = 10
    n_target_new: int = 20
    cov_target: float = 0.05
    u_e: float = 10.0
    pool_growth: int = 10_000
    max_pool: int = 1_000_000
    seed: int = 0
    strategy: str = "active"
    substitute_true: bool = False
    T: float = 0.08
    eps_lambda: float = 0.9999
    warm_start: bool = True
    eval_every: int = 1
    chunk: int = 1000

    def __post_init__(self):
        if not self.y_th > 0:
            raise ValueError("y_th must be positive")
        if not self.u_e > 2:
            raise ValueError("u_e must exceed 2")
        if not 0 < self.cov_target < 1:
            raise ValueError("cov_target must lie in (0, 1)")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        for name in ("n_pool", "n_initial", "pool_growth", "eval_every", "chunk"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.n_target_new < 0:
            raise ValueError("n_target_new must be non-negative")
        if self.max_pool < self.n_pool:
            raise ValueError("max_pool must be at least n_pool")


@dataclass
class IterationRecord:
    n_new: int
    pf_hat: float
    cov: float
    selected: int
    n_pool: int
    wall_time: float


@dataclass
class ReliabilityResult:
    pf_hat: float
    cov: float
    history: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    flagged: list = field(default_factory=list)
    n_pool: int = 0
    strategy: str = "active"
    model: F2NarxModel | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k != "model"}
        d["history"] = [asdict(h) if isinstance(h, IterationRecord) else h for h in self.history]
        return json.dumps(d, indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "ReliabilityResult":
        d = json.loads(text)
        d["history"] = [IterationRecord(**h) for h in d["history"]]
        return cls(**d)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


# --------------------------------------------------------------------------- estimators


def first_passage_indicator(y, y_th: float):
    """1 where ``max |y| >= y_th`` along the last axis, else 0."""
    y = np.asarray(getattr(y, "values", y), dtype=np.float64)
    out = (np.max(np.abs(y), axis=-1) >= y_th).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def pf_cov(pf: float, n: int) -> float:
    """Coefficient of variation ``sqrt((1 - P) / ((N - 1) P))`` of the MCS estimator."""
    if n < 2:
        return math.inf
    if pf <= 0:
        return math.inf
    return math.sqrt((1.0 - pf) / ((n - 1) * pf))


def estimate_pf(responses, y_th: float) -> tuple[float, float]:
    """Failure fraction of ``responses`` (rows, or a sequence of trajectories) and its CoV."""
    if isinstance(responses, np.ndarray):
        Y = np.atleast_2d(responses)
    else:
        Y = np.array([np.asarray(getattr(r, "values", r)) for r in responses])
    if Y.shape[0] == 0:
        raise ValueError("need at least one response")
    ind = first_passage_indicator(Y, y_th)
    pf = float(np.mean(ind))
    return pf, pf_cov(pf, Y.shape[0])


def _side_umin(mu, sigma, target, side_fails, u_e):
    with np.errstate(divide="ignore", invalid="ignore"):
        U = np.where(sigma > 0, np.abs(mu - target) / np.where(sigma > 0, sigma, 1.0), np.inf)
    confident = np.any(side_fails & (U >= 2.0), axis=-1)
    return np.where(confident, u_e, np.min(U, axis=-1))


def u_min_double_sided(mean, variance, y_th: float, u_e: float = 10.0):
    """Double-sided ``U_min`` of each trajectory (last axis is time).

    Instants with zero predictive standard deviation have ``U = inf``.
    """
    mu = np.asarray(getattr(mean, "values", mean), dtype=np.float64)
    var = np.asarray(getattr(variance, "values", variance), dtype=np.float64)
    if np.any(var < 0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(var)
    upper = _side_umin(mu, sigma, y_th, mu >= y_th, u_e)
    lower = _side_umin(mu, sigma, -y_th, mu <= -y_th, u_e)
    out = np.minimum(upper, lower)
    return float(out) if out.ndim == 0 else out


def select_next(scores: np.ndarray, excluded) -> int:
    """Index of the smallest score outside ``excluded``; lowest index on ties."""
    s = np.asarray(scores, dtype=np.float64)
    mask = np.ones(s.size, dtype=bool)
    mask[list(excluded)] = False
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise ValueError("every pool member has already been selected")
    return int(candidates[np.argmin(s[candidates])])


# --------------------------------------------------------------------------- active learning


class _Pool:
    def __init__(self, problem, theta, phi):
        self.problem = problem
        self.theta = theta
        self.phi = phi
        self.U = problem.excite(theta, phi)
        self.indicator = np.zeros(0, dtype=np.int64)
        self.umin = np.zeros(0)

    def __len__(self):
        return self.theta.shape[0]

    def extend(self, theta, phi):
        self.theta = np.vstack([self.theta, theta])
        self.phi = np.vstack([self.phi, phi])
        self.U = np.vstack([self.U, self.problem.excite(theta, phi)])

    def score(self, model, cfg: ReliabilityConfig, start: int, need_u: bool):
        """Surrogate indicators (and ``U_min`` when requested) for members ``start..``."""
        y0 = self.problem.initial_value(self.theta)
        ind, umin = [], []
        for a in range(start, len(self), cfg.chunk):
            sl = slice(a, min(a + cfg.chunk, len(self)))
            if need_u:
                pred = predict_probabilistic_batch(model, self.theta[sl], self.U[sl], y0[sl])
                mu = pred.mean
                umin.append(u_min_double_sided(mu, pred.variance, cfg.y_th, cfg.u_e))
            else:
                mu = predict_mean_batch(model, self.theta[sl], self.U[sl], y0[sl])
                umin.append(np.full(mu.shape[0], np.nan))
            ind.append(first_passage_indicator(mu, cfg.y_th))
        if start == 0:
            self.indicator = np.concatenate(ind)
            self.umin = np.concatenate(umin)
        else:
            self.indicator = np.concatenate([self.indicator, *ind])
            self.umin = np.concatenate([self.umin, *umin])


def _write_log_header(path):
    with open(path, "w") as fh:
        fh.write("n_new\tpf_hat\tcov\tselected\twall_time\n")


def _append_log(path, rec: IterationRecord):
    with open(path, "a") as fh:
        fh.write(f"{rec.n_new}\t{rec.pf_hat:.10g}\t{rec.cov:.10g}\t{rec.selected}\t{rec.wall_time:.3f}\n")


def run_active_learning(
    problem,
    cfg: ReliabilityConfig,
    model_cfg: F2NarxConfig | None = None,
    initial: Dataset | None = None,
    pool: tuple[np.ndarray, np.ndarray] | None = None,
    log_path: str | os.PathLike | None = None,
) -> ReliabilityResult:
    """Surrogate-based first-passage probability with sequential enrichment.

    ``problem`` supplies ``sample(rng, n)``, ``excite(theta, phi)``,
    ``respond(theta, U)``, ``initial_value(theta)`` and ``generate(theta, phi)``. ``initial`` and ``pool``
    override the design and pool draws (used to share them across runs).
    """
    model_cfg = model_cfg or F2NarxConfig()
    root = np.random.SeedSequence(cfg.seed)
    rng_pool, rng_design, rng_pick = (np.random.default_rng(s) for s in root.spawn(3))
    t_start = time.perf_counter()

    if pool is None:
        pool = problem.sample(rng_pool, cfg.n_pool)
    P = _Pool(problem, *pool)
    ds = initial if initial is not None else problem.generate(*problem.sample(rng_design, cfg.n_initial))
    if log_path is not None:
        _write_log_header(log_path)

    selected: list[int] = []
    flagged: list[int] = []
    true_ind: dict[int, int] = {}
    history: list[IterationRecord] = []
    n_new, model, last_pick = 0, None, -1
    random_order = rng_pick.permutation(len(P)) if cfg.strategy == "random" else None

    def record(pf, cov, picked):
        rec = IterationRecord(n_new, pf, cov, picked, len(P), time.perf_counter() - t_start)
        history.append(rec)
        if log_path is not None:
            _append_log(log_path, rec)
        logger.info("N_new=%d pf=%.5g cov=%.4g selected=%d", n_new, pf, cov, picked)

    def estimate():
        ind = P.indicator.copy()
        if cfg.substitute_true:
            for i, v in true_ind.items():
                ind[i] = v
        pf = float(ind.mean())
        return pf, pf_cov(pf, len(ind))

    while True:
        evaluate = cfg.strategy == "active" or n_new % cfg.eval_every == 0 or n_new == cfg.n_target_new
        if evaluate:
            model = train(ds, cfg.T, cfg.eps_lambda, model_cfg, warm_start=model if cfg.warm_start else None)
            need_u = cfg.strategy == "active" and n_new < cfg.n_target_new
            P.score(model, cfg, 0, need_u)
            pf, cov = estimate()
            record(pf, cov, last_pick)
        if n_new >= cfg.n_target_new:
            break
        excluded = set(selected) | set(flagged)
        while True:
            if cfg.strategy == "active":
                idx = select_next(P.umin, excluded)
            else:
                idx = next(int(i) for i in random_order if int(i) not in excluded)
            y, ok = problem.respond(P.theta[idx : idx + 1], P.U[idx : idx + 1])
            if ok[0]:
                break
            logger.warning("simulation failed for pool member %d; choosing the next one", idx)
            flagged.append(idx)
            excluded.add(idx)
        new = Dataset(ds.grid, P.theta[idx : idx + 1], P.phi[idx : idx + 1], P.U[idx : idx + 1], y)
        ds = ds.concat(new)
        selected.append(idx)
        true_ind[idx] = int(first_passage_indicator(y[0], cfg.y_th))
        last_pick = idx
        n_new += 1

    # Pool enrichment until the coefficient of variation is small enough.
    pf, cov = estimate()
    while not cov < cfg.cov_target and len(P) + cfg.pool_growth <= cfg.max_pool:
        start = len(P)
        P.extend(*problem.sample(rng_pool, cfg.pool_growth))
        P.score(model, cfg, start, need_u=False)
        pf, cov = estimate()
        record(pf, cov, -1)

    return ReliabilityResult(
        pf_hat=pf,
        cov=cov,
        history=history,
        selected=selected,
        flagged=flagged,
        n_pool=len(P),
        strategy=cfg.strategy,
        model=model,
    )


def reference_pf(problem, theta: np.ndarray, phi: np.ndarray, y_th: float, chunk: int = 2000) -> float:
    """Failure fraction of the true simulator over the given samples."""
    n_fail = 0
    for a in range(0, len(theta), chunk):
        sl = slice(a, a + chunk)
        Y, ok = problem.respond(theta[sl], problem.excite(theta[sl], phi[sl]))
        if not ok.all():
            raise RuntimeError("reference simulation failed")
        n_fail += int(first_passage_indicator(Y, y_th).sum())
    return n_fail / len(theta)
