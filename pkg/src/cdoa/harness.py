"""Monte-Carlo evaluation over (mask count, SNR) cells and the estimators it compares."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aperture import TransferFunction
from .dataset import AngleGrid
from .errors import DataMismatchError, ValidationError
from .forward import measure_batch
from .gatnet.checkpoint import model_digest
from .gatnet.model import GatModel, predict
from .recon import MatchedFilterEstimator

CSV_FIELDS = ["estimator", "num_masks", "snr_db", "samples", "mae_theta", "mae_phi", "mae_joint",
              "tf_hash", "model_hash", "seed"]


@dataclass(frozen=True)
class SweepSpec:
    mask_counts: tuple[int, ...]
    snr_points_db: tuple[float, ...] = tuple(float(x) for x in range(-20, 31, 5))
    samples_per_point: int = 5000
    grid: AngleGrid = field(default_factory=AngleGrid)
    seed: int = 0

    def __post_init__(self):
        if not self.mask_counts:
            raise ValidationError("mask_counts must be nonempty")
        if not self.snr_points_db:
            raise ValidationError("snr_points_db must be nonempty")
        if self.samples_per_point < 1:
            raise ValidationError("samples_per_point must be positive")


@dataclass
class CellData:
    s: np.ndarray
    labels: np.ndarray
    num_masks: int
    snr_db: float


class GatEstimator:
    def __init__(self, model: GatModel, name: str = "gat"):
        self.model = model
        self.name = name
        self.model_hash = model_digest(model)
        self.num_masks = model.num_features

    def __call__(self, cell: CellData) -> np.ndarray:
        x = np.stack([cell.s.real, cell.s.imag], axis=1)
        return predict(self.model, x)


class MatchedFilter:
    name = "matched_filter"
    model_hash = "-"

    def __init__(self, tf: TransferFunction, grid: AngleGrid | None = None, normalization="sensed"):
        self.estimator = MatchedFilterEstimator(tf, grid, normalization)
        self.num_masks = tf.num_masks

    def __call__(self, cell: CellData) -> np.ndarray:
        return self.estimator(cell.s)


class OracleEstimator:
    """Returns the truth; a harness self-check."""

    name = "oracle"
    model_hash = "-"
    num_masks = None

    def __call__(self, cell: CellData) -> np.ndarray:
        return cell.labels.copy()


class ConstantEstimator:
    name = "constant"
    model_hash = "-"
    num_masks = None

    def __init__(self, value=(0.0, 0.0)):
        self.value = np.asarray(value, dtype=np.float64)

    def __call__(self, cell: CellData) -> np.ndarray:
        return np.tile(self.value, (cell.labels.shape[0], 1))


class RandomGuessEstimator:
    """Uniform draws over the grid's continuous range, seeded per cell."""

    name = "random_guess"
    model_hash = "-"
    num_masks = None

    def __init__(self, grid: AngleGrid | None = None, seed: int = 0):
        self.grid = grid or AngleGrid()
        self.seed = seed

    def __call__(self, cell: CellData) -> np.ndarray:
        rng = np.random.default_rng([self.seed, cell.num_masks, int(round(cell.snr_db * 1000)) & 0xFFFFFFFF])
        g = self.grid
        n = cell.labels.shape[0]
        return np.stack([rng.uniform(g.theta_min, g.theta_max, n), rng.uniform(g.phi_min, g.phi_max, n)], 1)


def cell_labels(spec: SweepSpec, snr_index: int) -> np.ndarray:
    """Test angles for an SNR point; shared by every estimator and mask count."""
    pairs = spec.grid.pairs()
    rng = np.random.default_rng([int(spec.seed), 5, snr_index])
    return pairs[rng.integers(0, pairs.shape[0], size=spec.samples_per_point)]


def cell_seeds(spec: SweepSpec, snr_index: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(spec.seed), 6, snr_index])
    return ss.generate_state(spec.samples_per_point, np.uint64)


def make_cell(tf: TransferFunction, spec: SweepSpec, snr_index: int) -> CellData:
    snr = float(spec.snr_points_db[snr_index])
    labels = cell_labels(spec, snr_index)
    s = measure_batch(tf, labels[:, 0], labels[:, 1], snr, cell_seeds(spec, snr_index))
    return CellData(s=s, labels=labels, num_masks=tf.num_masks, snr_db=snr)


def score(pred, labels) -> tuple[float, float, float]:
    err = np.abs(np.asarray(pred) - np.asarray(labels))
    return float(err[:, 0].mean()), float(err[:, 1].mean()), float(err.mean())


def run_sweep(entries, spec: SweepSpec, threads: int = 1) -> list[dict]:
    """Evaluate estimators on every (mask count, SNR) cell.

    ``entries`` is a list of ``(tf, [estimators])``; each transfer function
    fixes the mask count of its estimators. Rows come back in entry, SNR,
    estimator order whatever the thread count.
    """
    if not entries:
        raise ValidationError("nothing to evaluate")
    for tf, estimators in entries:
        for est in estimators:
            if getattr(est, "num_masks", None) not in (None, tf.num_masks):
                raise DataMismatchError(
                    f"estimator {est.name} expects M={est.num_masks}, transfer function has M={tf.num_masks}")
    jobs = [(tf, ests, k) for tf, ests in entries for k in range(len(spec.snr_points_db))]

    def work(job):
        tf, ests, k = job
        cell = make_cell(tf, spec, k)
        rows = []
        for est in ests:
            mt, mp, mj = score(est(cell), cell.labels)
            rows.append({"estimator": est.name, "num_masks": tf.num_masks, "snr_db": cell.snr_db,
                         "samples": spec.samples_per_point, "mae_theta": mt, "mae_phi": mp,
                         "mae_joint": mj, "tf_hash": tf.digest(), "model_hash": est.model_hash,
                         "seed": spec.seed})
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    return [row for rows in results for row in rows]


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def read_rows(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            r = dict(r)
            r["num_masks"] = int(r["num_masks"])
            r["samples"] = int(r["samples"])
            r["seed"] = int(r["seed"])
            for k in ("snr_db", "mae_theta", "mae_phi", "mae_joint"):
                r[k] = float(r[k])
            out.append(r)
    return out


def expected_constant_mae(lo=-30.0, hi=30.0) -> float:
    """E|u| for u uniform on [lo, hi] (guess 0)."""
    return (lo * lo + hi * hi) / (2.0 * (hi - lo))


def expected_random_mae(lo=-30.0, hi=30.0) -> float:
    """E|a - b| for independent uniforms on [lo, hi]."""
    return (hi - lo) / 3.0


def parse_range(text: str) -> tuple[float, ...]:
    """``"-20:30:5"`` or ``"0,10,30"`` into a tuple of floats."""
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValidationError("range step must be positive")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + i * step, 9) for i in range(n))
    if not text:
        return ()
    return tuple(float(t) for t in text.split(","))
