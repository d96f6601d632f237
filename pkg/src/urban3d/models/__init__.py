"""Prediction models: OLS, elastic net (Gaussian/logistic), random forest,
ROSE oversampling, and the spatial error model with a Gaussian-process
error term and low-rank predictive-process approximation."""

from .dataset import Dataset
from .linear import (
    ElasticNetConfig,
    LinearModel,
    fit_elastic_net,
    fit_ols,
    kkt_residual,
)
from .forest import ForestConfig, RandomForest, fit_random_forest
from .rose import rose_sample
from .sem import (
    SemConfig,
    SemParams,
    PredictiveProcess,
    exp_cov,
    fit_sem,
    kmeans_knots,
    predict_sem,
)
from .serialize import load_model, save_model

__all__ = [
    "Dataset",
    "ElasticNetConfig",
    "LinearModel",
    "fit_elastic_net",
    "fit_ols",
    "kkt_residual",
    "ForestConfig",
    "RandomForest",
    "fit_random_forest",
    "rose_sample",
    "SemConfig",
    "SemParams",
    "PredictiveProcess",
    "exp_cov",
    "fit_sem",
    "kmeans_knots",
    "predict_sem",
    "load_model",
    "save_model",
]
