"""Distributionally robust feature selection by noise relaxation."""
__version__ = "0.1.0"

from ._backend import BACKENDS, get_backend
from .baselines import LassoModel, dro_lasso, lasso_fit, lasso_rank, random_select
from .data import (DataError, MultiPopulationData, PopulationDataset, SchemaError,
                   generate_synthetic, load_csv, split_dataset, standardize, write_csv)
from .evaluation import DownstreamConfig, compare_methods, downstream_evaluate
from .mu_model import ConditionalMeanModel, build_mu_cache, fit_conditional_mean
from .objective import ALPHA_MIN, Objective, ObjectiveConfig, kernel_weights, population_loss
from .optimizer import OptimizerConfig, optimize, select_features
from .selectors import MuConfig, run_drfs

__all__ = [
    "ALPHA_MIN", "BACKENDS", "ConditionalMeanModel", "DataError", "DownstreamConfig",
    "LassoModel", "MultiPopulationData", "MuConfig", "Objective", "ObjectiveConfig",
    "OptimizerConfig", "PopulationDataset", "SchemaError", "build_mu_cache", "compare_methods",
    "downstream_evaluate", "dro_lasso", "fit_conditional_mean", "generate_synthetic",
    "get_backend", "kernel_weights", "lasso_fit", "lasso_rank", "load_csv", "optimize",
    "population_loss", "random_select", "run_drfs", "select_features", "split_dataset",
    "standardize", "write_csv",
]
