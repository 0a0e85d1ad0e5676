"""End-to-end experiment: aperture -> dataset -> train -> eval, per mask count.

Stage seeds are derived from the run seed by fixed offsets (aperture +0,
training data +1, model init/shuffling +2, test sweep +3), so any single
stage can be re-run in isolation.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, fields

from .aperture import ApertureConfig, build_transfer_function, save_transfer_function
from .dataset import AngleGrid, DatasetSpec, generate_dataset
from .errors import ValidationError
from .gatnet.checkpoint import save_model
from .gatnet.train import TrainConfig, train
from .harness import GatEstimator, MatchedFilter, SweepSpec, run_sweep, write_rows
from .plotting import plot_csv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    mask_counts: tuple[int, ...] = (100,)
    train_samples: int = 50000
    train_snr_db: float = 50.0
    grid_step: float = 1.0
    grid_limit: float = 30.0
    test_samples: int = 5000
    snr_points_db: tuple[float, ...] = tuple(float(x) for x in range(-20, 31, 5))
    dense_baseline: bool = False
    matched_filter: bool = False
    log_timing: bool = True

    @property
    def grid(self) -> AngleGrid:
        return AngleGrid.uniform(-self.grid_limit, self.grid_limit, self.grid_step)


def _pick(cls, section: dict) -> dict:
    names = {f.name for f in fields(cls)}
    extra = set(section) - names
    if extra:
        raise ValidationError(f"unknown {cls.__name__} keys: {sorted(extra)}")
    return dict(section)


def experiment_from_config(cfg: dict) -> tuple[ExperimentConfig, dict, TrainConfig, dict]:
    exp = dict(cfg.get("experiment", {}))
    for key in ("mask_counts", "snr_points_db"):
        if key in exp:
            exp[key] = tuple(exp[key])
    train_section = dict(cfg.get("train", {}))
    arch = {k: tuple(train_section.pop(k)) for k in ("gal_widths", "dense_widths") if k in train_section}
    return (ExperimentConfig(**_pick(ExperimentConfig, exp)), dict(cfg.get("aperture", {})),
            TrainConfig(**_pick(TrainConfig, train_section)), arch)


def run_experiment(exp: ExperimentConfig, out_dir, seed: int = 0, aperture: dict | None = None,
                   train_config: TrainConfig = TrainConfig(), arch: dict | None = None,
                   threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    arch = arch or {}
    entries = []
    summary = {"seed": seed, "runs": []}
    for m in exp.mask_counts:
        ap = ApertureConfig(**{**(aperture or {}), "num_masks": int(m), "seed": seed})
        tf = build_transfer_function(ap)
        tf_hash = save_transfer_function(tf, os.path.join(out_dir, f"tf_M{m}.tf"))
        spec = DatasetSpec(samples_total=exp.train_samples, snr_db=exp.train_snr_db, seed=seed + 1,
                           grid=exp.grid, tf_reference=tf_hash, val_fraction=train_config.val_fraction)
        data = generate_dataset(spec, tf, os.path.join(out_dir, f"train_M{m}.ds"))
        estimators = []
        model, tlog = train(data, train_config, seed=seed + 2, **arch)
        model_hash = save_model(model, os.path.join(out_dir, f"gat_M{m}.nn"))
        tlog.write_csv(os.path.join(out_dir, f"gat_M{m}_log.csv"), include_timing=exp.log_timing)
        estimators.append(GatEstimator(model))
        run = {"num_masks": m, "tf_hash": tf_hash, "gat_hash": model_hash,
               "gat_best_epoch": tlog.best_epoch, "gat_stopped_epoch": tlog.stopped_epoch}
        if exp.dense_baseline:
            dmodel, dlog = train(data, train_config, seed=seed + 2, dense_only=True,
                                 dense_widths=arch.get("dense_widths", (64, 32, 16, 2)))
            run["dense_hash"] = save_model(dmodel, os.path.join(out_dir, f"dense_M{m}.nn"))
            dlog.write_csv(os.path.join(out_dir, f"dense_M{m}_log.csv"), include_timing=exp.log_timing)
            estimators.append(GatEstimator(dmodel, name="dense"))
        if exp.matched_filter:
            estimators.append(MatchedFilter(tf, exp.grid))
        log.info("M=%d trained: best epoch %d", m, tlog.best_epoch)
        entries.append((tf, estimators))
        summary["runs"].append(run)
    sweep = SweepSpec(mask_counts=tuple(exp.mask_counts), snr_points_db=tuple(exp.snr_points_db),
                      samples_per_point=exp.test_samples, grid=exp.grid, seed=seed + 3)
    rows = run_sweep(entries, sweep, threads=threads)
    csv_path = os.path.join(out_dir, "results.csv")
    write_rows(rows, csv_path)
    plot_csv(csv_path, os.path.join(out_dir, "results.svg"))
    summary["rows"] = rows
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump({k: v for k, v in summary.items() if k != "rows"}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
