"""Mini-batch training with validation-based early stopping."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..dataset import MINOR_DIAGONAL, DatasetArrays, split_indices
from ..errors import NumericError, ValidationError
from . import model as gm
from .optim import RMSprop

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-6
    max_epochs: int = 500
    patience: int = 20
    batch_size: int = 64
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-7
    l2_lambda: float = 5e-4
    val_fraction: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValidationError("max_epochs and batch_size must be positive")
        if self.patience < 1:
            raise ValidationError("patience must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    wall_seconds: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    early_stopped: bool = False

    @property
    def initial_train_loss(self) -> float:
        return self.records[0].train_loss

    @property
    def final_train_loss(self) -> float:
        return self.records[-1].train_loss

    def write_csv(self, path, include_timing=True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "wall_seconds"])
            for r in self.records:
                wall = f"{r.wall_seconds:.3f}" if include_timing else "0"
                w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), wall])


class EarlyStopping:
    """Track the best validation loss; signal a stop after ``patience`` epochs without improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record ``value`` for ``epoch``; returns True when training should stop."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


def data_loss(model: gm.GatModel, x, y, batch_size=4096) -> float:
    """MAE without the regulariser, evaluated in chunks."""
    if len(y) == 0:
        return math.nan
    pred = gm.predict(model, x, MINOR_DIAGONAL, batch_size)
    return float(np.mean(np.abs(pred - y)))


def train(data: DatasetArrays, config: TrainConfig = TrainConfig(), seed: int = 0,
          model: gm.GatModel | None = None, dense_only: bool = False,
          gal_widths=gm.DEFAULT_GAL_WIDTHS, dense_widths=gm.DEFAULT_DENSE_WIDTHS,
          evaluate=None) -> tuple[gm.GatModel, TrainingLog]:
    """Fit a model on ``data``; returns the best-validation parameters and the log.

    The validation subset is a stratified ``config.val_fraction`` of
    ``data``. ``evaluate(model, x_val, y_val)`` overrides the validation
    loss, mainly for testing the stopping rule.
    """
    if len(data) == 0:
        raise ValidationError("cannot train on an empty dataset")
    if model is None:
        model = gm.init_model(data.num_masks, seed=seed, gal_widths=gal_widths,
                              dense_widths=dense_widths, l2_lambda=config.l2_lambda,
                              dense_only=dense_only)
    elif model.num_features != data.num_masks:
        raise ValidationError(f"model expects M={model.num_features}, dataset has M={data.num_masks}")
    evaluate = evaluate or data_loss
    x_all = data.graphs()
    y_all = data.labels
    train_idx, val_idx = split_indices(y_all, config.val_fraction, seed)
    x_tr, y_tr = x_all[train_idx], y_all[train_idx]
    x_val, y_val = x_all[val_idx], y_all[val_idx]
    if len(val_idx) == 0:
        x_val, y_val = x_tr, y_tr

    opt = RMSprop(config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon)
    shuffle_rng = np.random.default_rng([int(seed), 4])
    stopper = EarlyStopping(config.patience)
    best_params = {k: v.copy() for k, v in model.params.items()}
    log_ = TrainingLog()
    t0 = time.perf_counter()
    log_.records.append(EpochRecord(0, data_loss(model, x_tr, y_tr), evaluate(model, x_val, y_val),
                                    time.perf_counter() - t0))
    n = len(train_idx)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            b = order[lo:lo + config.batch_size]
            penalty = gm.l2_penalty(model)
            value, grads = gm.backward(model, x_tr[b], y_tr[b])
            if not math.isfinite(value):
                raise NumericError(f"training diverged at epoch {epoch}")
            opt.step(model.params, grads)
            total += (value - penalty) * len(b)
        val = evaluate(model, x_val, y_val)
        if not math.isfinite(val):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        log_.records.append(EpochRecord(epoch, total / n, val, time.perf_counter() - t0))
        log.debug("epoch %d train %.4f val %.4f", epoch, total / n, val)
        stop = stopper.update(epoch, val)
        if stopper.best_epoch == epoch:
            best_params = {k: v.copy() for k, v in model.params.items()}
        if stop:
            log_.early_stopped = True
            break
    log_.stopped_epoch = epoch
    log_.best_epoch = stopper.best_epoch
    model.params = best_params
    return model, log_
