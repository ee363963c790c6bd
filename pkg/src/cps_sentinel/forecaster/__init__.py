"""Windowed 1-D CNN next-step forecaster built on plain numpy."""

from .layers import (
    RELU,
    SIGMOID,
    TANH,
    Conv1DSpec,
    DenseSpec,
    FlattenSpec,
    MaxPool1DSpec,
    ShapeError,
    glorot_uniform,
)
from .model import (
    ADAM_EPS,
    CnnModel,
    EarlyStopper,
    TrainConfig,
    TrainHistory,
    adam_step,
    backward,
    build_model,
    default_stack,
    load_model,
    mae_loss,
    model_from_state,
    model_state,
    predict_series,
    save_model,
    spec_from_dict,
    train,
)

__all__ = [
    "ADAM_EPS",
    "RELU",
    "SIGMOID",
    "TANH",
    "Conv1DSpec",
    "DenseSpec",
    "FlattenSpec",
    "MaxPool1DSpec",
    "ShapeError",
    "glorot_uniform",
    "CnnModel",
    "EarlyStopper",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "backward",
    "build_model",
    "default_stack",
    "load_model",
    "mae_loss",
    "model_from_state",
    "model_state",
    "predict_series",
    "save_model",
    "spec_from_dict",
    "train",
]
