"""Command-line entry point: ``f2narx <subcommand> --config run.yaml``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 other.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError

from .config import ConfigError, RunConfig, load_config, substream
from .data import DatasetFormatError, Trajectory, load_dataset, save_dataset, save_trajectories_csv
from .gpr import GPFitError
from .metrics import nmse_rows
from .model import (
    ModelCheckError,
    mcs_variance_oracle,
    predict_mean_batch,
    predict_probabilistic_batch,
    select_hyperparameters,
    train,
)
from .modelio import ModelFormatError, load_model, read_arrays, save_model, write_arrays
from .reliability import run_active_learning
from .simulator import SimulationError

logger = logging.getLogger("f2narx")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
PREDICTION_MAGIC = b"F2NXPR01"


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _out(cfg: RunConfig, name: str, override: str | None) -> Path:
    if override:
        p = Path(override)
    else:
        p = Path(cfg.output_dir) / name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate(args) -> int:
    cfg = _config(args)
    try:
        problem = cfg.build_problem()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for split, n in (("train", cfg.dataset.n_train), ("test", cfg.dataset.n_test)):
        if n == 0:
            continue
        t = time.perf_counter()
        ds = problem.generate(*problem.sample(substream(cfg.seed, f"dataset.{split}"), n))
        path = _out(cfg, f"{split}.f2nx", getattr(args, f"{split}_out"))
        save_dataset(ds, path)
        print(f"{split}\t{n}\t{path}\t{time.perf_counter() - t:.2f}s")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.data or Path(cfg.output_dir) / "train.f2nx")
    mcfg = cfg.build_model_config()
    T, eps = cfg.windowing.T, cfg.windowing.eps_lambda
    if cfg.windowing.select or args.select:
        sel = select_hyperparameters(ds, cfg.windowing.T_grid, cfg.windowing.eps_grid, cfg.windowing.k_folds,
                                     mcfg, seed=cfg.seed)
        T, eps = sel.T, sel.eps_lambda
        for (t_, e_), score in sorted(sel.scores.items()):
            print(f"cv\t{t_:g}\t{e_:g}\t{score:.6e}")
    model = train(ds, T, eps, mcfg)
    path = _out(cfg, "model.f2nxm", args.model)
    save_model(model, path)
    print(f"trained\tT={T:g}\teps={eps:g}\tm_u={model.m_u}\tm_y={model.m_y}\t"
          f"train_seconds={model.info['train_seconds']:.3f}\t{path}")
    return EXIT_OK


def _predict(cfg, model, ds, mode):
    if mode == "probabilistic":
        mean, var = [], []
        for a in range(0, len(ds), cfg.prediction.chunk):
            sl = slice(a, a + cfg.prediction.chunk)
            p = predict_probabilistic_batch(model, ds.theta[sl], ds.excitation[sl], ds.response[sl, 0])
            mean.append(p.mean)
            var.append(p.variance)
        return np.vstack(mean), np.vstack(var)
    return predict_mean_batch(model, ds.theta, ds.excitation, ds.response[:, 0]), None


def cmd_predict(args) -> int:
    cfg = _config(args)
    model = load_model(args.model or Path(cfg.output_dir) / "model.f2nxm")
    ds = load_dataset(args.data or Path(cfg.output_dir) / "test.f2nx")
    mode = args.mode or cfg.prediction.mode
    t = time.perf_counter()
    mean, var = _predict(cfg, model, ds, mode)
    elapsed = time.perf_counter() - t
    path = _out(cfg, "prediction.f2np", args.out)
    arrays = {"grid": np.array([ds.grid.t0, ds.grid.dt, ds.grid.n_t]), "mean": mean}
    if var is not None:
        arrays["variance"] = var
    if cfg.prediction.mcs_samples >= 2:
        mc = mcs_variance_oracle(model, ds.theta, ds.excitation, ds.response[:, 0], cfg.prediction.mcs_samples,
                                 substream(cfg.seed, "mcs"))
        arrays["mcs_variance"] = mc.variance
    write_arrays(path, arrays, magic=PREDICTION_MAGIC)
    if args.csv:
        save_trajectories_csv([Trajectory(ds.grid, row) for row in mean], args.csv)
    print(f"predicted\t{len(ds)}\t{mode}\t{elapsed:.3f}s\t{path}")
    return EXIT_OK


def load_prediction(path):
    _, arrays = read_arrays(path, magic=PREDICTION_MAGIC)
    return arrays


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    model = load_model(args.model or Path(cfg.output_dir) / "model.f2nxm")
    ds = load_dataset(args.data or Path(cfg.output_dir) / "test.f2nx")
    t = time.perf_counter()
    Yh = predict_mean_batch(model, ds.theta, ds.excitation, ds.response[:, 0])
    t_mean = time.perf_counter() - t
    t = time.perf_counter()
    _predict(cfg, model, ds, "probabilistic")
    t_prob = time.perf_counter() - t
    err = nmse_rows(ds.response, Yh)
    path = _out(cfg, "metrics.tsv", args.out)
    with open(path, "w") as fh:
        fh.write("record\tnmse\n")
        for i, e in enumerate(err):
            fh.write(f"{i}\t{e:.10e}\n")
    n = len(ds)
    summary = [
        ("mean_nmse", f"{err.mean():.6e}"),
        ("median_nmse", f"{np.median(err):.6e}"),
        ("n_records", str(n)),
        ("predict_mean_seconds_per_record", f"{t_mean / n:.6e}"),
        ("predict_mean_seconds_per_1e4_records", f"{1e4 * t_mean / n:.3f}"),
        ("predict_probabilistic_seconds_per_1e4_records", f"{1e4 * t_prob / n:.3f}"),
    ]
    with open(path.with_suffix(".summary.tsv"), "w") as fh:
        for k, v in summary:
            fh.write(f"{k}\t{v}\n")
    for k, v in summary:
        print(f"{k}\t{v}")
    return EXIT_OK


def cmd_reliability(args) -> int:
    cfg = _config(args)
    try:
        problem = cfg.build_problem()
        rcfg = cfg.build_reliability_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    initial = None
    if args.data:
        initial = load_dataset(args.data)
    res = run_active_learning(problem, rcfg, cfg.build_model_config(), initial=initial,
                              log_path=out / "reliability_log.tsv")
    res.save(out / "reliability.json")
    if res.model is not None:
        save_model(res.model, out / "reliability_model.f2nxm")
    print(f"pf_hat\t{res.pf_hat:.6g}\tcov\t{res.cov:.4g}\tn_pool\t{res.n_pool}\tadded\t{len(res.selected)}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_all

    ok = True
    for name, passed, detail in run_all(quick=not args.full):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}\t{name}\t{detail}")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="f2narx", description="F2NARX surrogate modelling and reliability analysis")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        return p

    p = common(sub.add_parser("generate", help="simulate training and test datasets"))
    p.add_argument("--train-out")
    p.add_argument("--test-out")
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("train", help="train a model on a dataset"))
    p.add_argument("--data")
    p.add_argument("--model", help="output model file")
    p.add_argument("--select", action="store_true", help="cross-validate T and eps_lambda first")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("predict", help="predict a dataset with a trained model"))
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--csv", help="also write mean trajectories as CSV")
    p.add_argument("--mode", choices=("mean", "probabilistic"))
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("evaluate", help="NMSE table and prediction timing"))
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("reliability", help="active-learning first-passage probability"))
    p.add_argument("--data", help="initial design (default: simulate n_initial records)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("selfcheck", help="run the built-in oracle checks")
    p.add_argument("--full", action="store_true", help="larger problem sizes")
    p.set_defaults(func=cmd_selfcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelCheckError, GPFitError, SimulationError, LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, DatasetFormatError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
