"""From-scratch stacked LSTM forecaster for next-hour KPI prediction."""

from .model import (
    ForecastModel,
    HeadParams,
    LayerParams,
    LstmConfig,
    NormStats,
    forward,
    init_model,
    load_model,
    lstm_cell_step,
    model_from_json,
    model_to_json,
    param_arrays,
    save_model,
)
from .training import (
    AdamHyper,
    AdamState,
    EpochStats,
    InsufficientDataError,
    TrainingConfig,
    UndefinedMetricError,
    WindowedDataset,
    accuracy,
    adam_step,
    backward,
    compute_norm_stats,
    evaluate_heldout,
    make_windows,
    mse_loss,
    predict_from_window,
    predict_next_hour,
    train,
)

__all__ = [
    "AdamHyper",
    "AdamState",
    "EpochStats",
    "ForecastModel",
    "HeadParams",
    "InsufficientDataError",
    "LayerParams",
    "LstmConfig",
    "NormStats",
    "TrainingConfig",
    "UndefinedMetricError",
    "WindowedDataset",
    "accuracy",
    "adam_step",
    "backward",
    "compute_norm_stats",
    "evaluate_heldout",
    "forward",
    "init_model",
    "load_model",
    "lstm_cell_step",
    "make_windows",
    "model_from_json",
    "model_to_json",
    "mse_loss",
    "param_arrays",
    "predict_from_window",
    "predict_next_hour",
    "save_model",
    "train",
]
