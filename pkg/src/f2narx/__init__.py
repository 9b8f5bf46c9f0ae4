"""Function-on-function NARX surrogates for dynamical systems.

Windowed PCA features of excitation and response, exact and sparse GP banks
for the first and recursive windows, unscented-transform variance
propagation, and first-passage reliability with active learning.
"""

from .data import Dataset, ParamSample, TimeGrid, Trajectory, load_dataset, save_dataset
from .gpr import GPConfig, GpModel, fit_gp, predict_gp
from .metrics import mean_nmse, nmse
from .model import (
    F2NarxConfig,
    F2NarxModel,
    ProbabilisticPrediction,
    mcs_variance_oracle,
    predict_mean,
    predict_mean_batch,
    predict_probabilistic,
    predict_probabilistic_batch,
    select_hyperparameters,
    train,
)
from .modelio import load_model, save_model
from .reliability import ReliabilityConfig, ReliabilityResult, estimate_pf, run_active_learning
from .sgp import SgpModel, fit_sgp, predict_sgp
from .ut import ut_variance

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ParamSample", "TimeGrid", "Trajectory", "load_dataset", "save_dataset",
    "GPConfig", "GpModel", "fit_gp", "predict_gp", "SgpModel", "fit_sgp", "predict_sgp",
    "mean_nmse", "nmse", "ut_variance",
    "F2NarxConfig", "F2NarxModel", "ProbabilisticPrediction", "train", "predict_mean", "predict_mean_batch",
    "predict_probabilistic", "predict_probabilistic_batch", "mcs_variance_oracle", "select_hyperparameters",
    "load_model", "save_model",
    "ReliabilityConfig", "ReliabilityResult", "estimate_pf", "run_active_learning",
]
