"""From-scratch graph attention network for angle regression."""

from .model import (DEFAULT_DENSE_WIDTHS, DEFAULT_GAL_WIDTHS, GatModel, attention_weights, backward,
                    forward, init_model, loss, model_forward, parameter_count, predict)
from .optim import RMSprop
from .train import EarlyStopping, TrainConfig, TrainingLog, train

__all__ = [
    "DEFAULT_DENSE_WIDTHS", "DEFAULT_GAL_WIDTHS", "EarlyStopping", "GatModel", "RMSprop",
    "TrainConfig", "TrainingLog", "attention_weights", "backward", "forward", "init_model",
    "loss", "model_forward", "parameter_count", "predict", "train",
]
