from .linear import DegenerateWindow, LinearModel, fit_linear, predict_linear
from .nets import (
    DimensionMismatch,
    Layer,
    MlpParams,
    RnnParams,
    gradient,
    loss,
    mlp_forward,
    rnn_forward,
    rnn_step,
)
from .pipeline import (
    PREDICTED_AVG,
    ForecastConfig,
    InsufficientWindow,
    LinearForecaster,
    NeuralForecaster,
    forecast_cluster_average,
)
from .train import Dataset, NonFiniteLoss, TrainConfig, TrainHistory, train

__all__ = [
    "DegenerateWindow",
    "LinearModel",
    "fit_linear",
    "predict_linear",
    "DimensionMismatch",
    "Layer",
    "MlpParams",
    "RnnParams",
    "gradient",
    "loss",
    "mlp_forward",
    "rnn_forward",
    "rnn_step",
    "PREDICTED_AVG",
    "ForecastConfig",
    "InsufficientWindow",
    "LinearForecaster",
    "NeuralForecaster",
    "forecast_cluster_average",
    "Dataset",
    "NonFiniteLoss",
    "TrainConfig",
    "TrainHistory",
    "train",
]
