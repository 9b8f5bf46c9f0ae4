"""Run configuration: one YAML document, checked strictly.

Unknown keys and ill-typed values are rejected with the line they appear on.
Every key is optional; the defaults below reproduce the white-noise Bouc-Wen
study.
"""

from __future__ import annotations

import dataclasses
import math
import zlib
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
import yaml

from .data import TimeGrid
from .excitation import CloughPenzienSpec, SpectralWhiteNoiseSpec
from .gpr import GPConfig
from .model import F2NarxConfig
from .problems import BoucWenGroundMotion, BoucWenWhiteNoise
from .reliability import ReliabilityConfig
from .simulator import BoucWenParams

PROBLEMS = ("bouc_wen_white_noise", "bouc_wen_ground_motion")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose (``pool``, ``design``, ...)."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


@dataclass
class ExcitationSection:
    S: float = 0.05
    n_terms: int = 500
    d_omega: float = 30.0 * math.pi / 1000.0
    # ground-motion variant
    omega_g: float = 15.0
    zeta_g: float = 0.6
    omega_f: float = 1.5
    zeta_f: float = 0.6
    eta0: float = 0.15
    Tg: float = 45.0
    r: float = 2.0
    omega_u: float = 50.0 * math.pi
    N: int = 1000
    S0_mean: float = 1.5e-6
    S0_std: float = 1.5e-6
    c_range: list = field(default_factory=lambda: [1.0, 15.0])


@dataclass
class SimulatorSection:
    t0: float = 0.0
    dt: float | None = None
    n_t: int | None = None
    m_range: list = field(default_factory=lambda: [5.0e4, 7.0e4])
    k_range: list = field(default_factory=lambda: [4.0e6, 6.0e6])
    y0_range: list = field(default_factory=lambda: [-1.0e-2, 1.0e-2])
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    A: float = 1.0
    n: float = 3.0
    x_y: float = 0.04


@dataclass
class DatasetSection:
    n_train: int = 100
    n_test: int = 500


@dataclass
class WindowingSection:
    T: float = 0.08
    eps_lambda: float = 0.9999
    select: bool = False
    T_grid: list = field(default_factory=lambda: [0.04, 0.08, 0.12])
    eps_grid: list = field(default_factory=lambda: [0.99, 0.999, 0.9999])
    k_folds: int = 5


@dataclass
class GprSection:
    n_restarts: int = 4
    maxiter: int = 500
    lengthscale_bounds: list = field(default_factory=lambda: [1e-2, 1e3])
    signal_variance_bounds: list = field(default_factory=lambda: [1e-6, 1e2])
    noise_variance_bounds: list = field(default_factory=lambda: [1e-8, 1.0])
    normalize_y: bool = True
    n_inducing: int | None = None
    max_inducing: int = 256
    sgp_maxiter: int = 200
    optimize_inducing: bool = True
    init_subset: int = 500
    kuu_jitter: float = 1e-8
    kappa_policy: str = "fixed"
    ut_covariance: str = "full"


@dataclass
class ReliabilitySection:
    y_th: float = 0.14
    n_pool: int = 10_000
    n_initial: int = 10
    n_target_new: int = 20
    cov_target: float = 0.05
    u_e: float = 10.0
    pool_growth: int = 10_000
    max_pool: int = 1_000_000
    strategy: str = "active"
    substitute_true: bool = False
    warm_start: bool = True
    eval_every: int = 1


@dataclass
class PredictionSection:
    mode: str = "mean"
    mcs_samples: int = 0
    chunk: int = 1000


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    problem: str = "bouc_wen_white_noise"
    excitation: ExcitationSection = field(default_factory=ExcitationSection)
    simulator: SimulatorSection = field(default_factory=SimulatorSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    windowing: WindowingSection = field(default_factory=WindowingSection)
    gpr: GprSection = field(default_factory=GprSection)
    reliability: ReliabilitySection = field(default_factory=ReliabilitySection)
    prediction: PredictionSection = field(default_factory=PredictionSection)

    # ---------------------------------------------------------------- builders

    def build_problem(self):
        s, e = self.simulator, self.excitation
        osc = BoucWenParams(alpha=s.alpha, beta=s.beta, gamma=s.gamma, A=s.A, n=s.n, x_y=s.x_y)
        common = dict(oscillator=osc, m_range=tuple(s.m_range), k_range=tuple(s.k_range), y0_range=tuple(s.y0_range))
        if self.problem == "bouc_wen_white_noise":
            grid = TimeGrid(s.t0, s.dt or 0.004, s.n_t or 3001)
            spec = SpectralWhiteNoiseSpec(S=e.S, n_terms=e.n_terms, d_omega=e.d_omega)
            return BoucWenWhiteNoise(grid=grid, excitation=spec, **common)
        grid = TimeGrid(s.t0, s.dt or 0.005, s.n_t or 9001)
        ground = CloughPenzienSpec(
            omega_g=e.omega_g, zeta_g=e.zeta_g, omega_f=e.omega_f, zeta_f=e.zeta_f,
            S0=e.S0_mean, eta0=e.eta0, Tg=e.Tg, r=e.r, omega_u=e.omega_u, N=e.N,
        )
        return BoucWenGroundMotion(
            grid=grid, ground=ground, S0_mean=e.S0_mean, S0_std=e.S0_std, c_range=tuple(e.c_range), **common
        )

    def build_model_config(self) -> F2NarxConfig:
        g = self.gpr
        base = GPConfig(
            n_restarts=g.n_restarts,
            seed=self.seed,
            maxiter=g.maxiter,
            lengthscale_bounds=tuple(g.lengthscale_bounds),
            signal_variance_bounds=tuple(g.signal_variance_bounds),
            noise_variance_bounds=tuple(g.noise_variance_bounds),
            normalize_y=g.normalize_y,
            n_inducing=g.n_inducing,
            max_inducing=g.max_inducing,
            sgp_maxiter=g.sgp_maxiter,
            optimize_inducing=g.optimize_inducing,
            init_subset=g.init_subset,
            kuu_jitter=g.kuu_jitter,
        )
        return F2NarxConfig(gp=base, sgp=dataclasses.replace(base, seed=self.seed + 1000),
                            n_inducing=g.n_inducing, kappa_policy=g.kappa_policy,
                            ut_covariance=g.ut_covariance)

    def build_reliability_config(self) -> ReliabilityConfig:
        r = self.reliability
        return ReliabilityConfig(
            y_th=r.y_th, n_pool=r.n_pool, n_initial=r.n_initial, n_target_new=r.n_target_new,
            cov_target=r.cov_target, u_e=r.u_e, pool_growth=r.pool_growth, max_pool=r.max_pool,
            seed=self.seed, strategy=r.strategy, substitute_true=r.substitute_true,
            T=self.windowing.T, eps_lambda=self.windowing.eps_lambda, warm_start=r.warm_start,
            eval_every=r.eval_every, chunk=self.prediction.chunk,
        )


_CHOICES = {
    ("", "problem"): PROBLEMS,
    ("gpr", "kappa_policy"): ("fixed", "clamped"),
    ("gpr", "ut_covariance"): ("full", "diagonal"),
    ("reliability", "strategy"): ("active", "random"),
    ("prediction", "mode"): ("mean", "probabilistic"),
}


_OPTIONAL_INTS = ("simulator.n_t", "gpr.n_inducing")


def _check_scalar(value, default, path, line, source):
    """Validate ``value`` against the type of the field default."""
    if path in _OPTIONAL_INTS:
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{path} must be an integer or null, got {value!r}", line, source)
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false, got {value!r}", line, source)
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}", line, source)
    elif isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)) and value is not None:
            raise ConfigError(f"{path} must be a number, got {value!r}", line, source)
        if value is not None:
            value = float(value) if isinstance(default, float) else value
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}", line, source)
    elif isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{path} must be a list of numbers, got {value!r}", line, source)
        if len(default) == 2 and len(value) != 2 and path.endswith(("range", "bounds")):
            raise ConfigError(f"{path} must have two entries", line, source)
        value = [float(v) for v in value]
    return value


def _positive_fields(cfg: RunConfig, source: str, lines: dict):
    checks = [
        ("dataset.n_train", cfg.dataset.n_train >= 1),
        ("dataset.n_test", cfg.dataset.n_test >= 0),
        ("windowing.T", cfg.windowing.T > 0),
        ("windowing.eps_lambda", 0 < cfg.windowing.eps_lambda <= 1),
        ("windowing.k_folds", cfg.windowing.k_folds >= 2),
        ("gpr.n_restarts", cfg.gpr.n_restarts >= 1),
        ("reliability.y_th", cfg.reliability.y_th > 0),
        ("reliability.u_e", cfg.reliability.u_e > 2),
        ("reliability.cov_target", 0 < cfg.reliability.cov_target < 1),
    ]
    for path, ok in checks:
        if not ok:
            raise ConfigError(f"{path} is out of range", lines.get(path), source)


def _node_to_python(node):
    return yaml.safe_load(yaml.serialize(node))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse a YAML document into a :class:`RunConfig`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source)
    cfg = RunConfig()
    if root is None:
        return cfg
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", root.start_mark.line + 1, source)
    lines: dict[str, int] = {}
    seen_top = set()
    for knode, vnode in root.value:
        key, line = knode.value, knode.start_mark.line + 1
        if key in seen_top:
            raise ConfigError(f"duplicate key {key!r}", line, source)
        seen_top.add(key)
        names = {f.name: f for f in fields(RunConfig)}
        if key not in names:
            raise ConfigError(f"unknown key {key!r}; expected one of {sorted(names)}", line, source)
        lines[key] = line
        default = getattr(cfg, key)
        if dataclasses.is_dataclass(default):
            if isinstance(vnode, yaml.ScalarNode) and vnode.value in ("", "~", "null"):
                continue
            if not isinstance(vnode, yaml.MappingNode):
                raise ConfigError(f"section {key!r} must be a mapping", line, source)
            sub = {f.name for f in fields(default)}
            seen = set()
            for k2, v2 in vnode.value:
                l2 = k2.start_mark.line + 1
                if k2.value in seen:
                    raise ConfigError(f"duplicate key {key}.{k2.value}", l2, source)
                seen.add(k2.value)
                if k2.value not in sub:
                    raise ConfigError(
                        f"unknown key {k2.value!r} in section {key!r}; expected one of {sorted(sub)}", l2, source
                    )
                path = f"{key}.{k2.value}"
                lines[path] = l2
                value = _check_scalar(_node_to_python(v2), getattr(default, k2.value), path, l2, source)
                choices = _CHOICES.get((key, k2.value))
                if choices and value not in choices:
                    raise ConfigError(f"{path} must be one of {choices}, got {value!r}", l2, source)
                setattr(default, k2.value, value)
        else:
            value = _check_scalar(_node_to_python(vnode), default, key, line, source)
            choices = _CHOICES.get(("", key))
            if choices and value not in choices:
                raise ConfigError(f"{key} must be one of {choices}, got {value!r}", line, source)
            setattr(cfg, key, value)
    _positive_fields(cfg, source, lines)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from exc
    return parse_config(text, str(path))


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)
