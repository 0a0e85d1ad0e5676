"""Dataset generation, the CDOA-DS binary format, and the two-node graph view."""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from . import kernels
from .aperture import TransferFunction
from .errors import CorruptFileError, DataMismatchError, ValidationError
from .forward import Measurement, measure_batch

DS_MAGIC = b"CDOA-DS\0"
DS_VERSION = 1
_HEADER = struct.Struct("<HIQd6dQ")
HEADER_SIZE = len(DS_MAGIC) + _HEADER.size

# fixed two-node adjacency: real node <-> imaginary node, no self loops
MINOR_DIAGONAL = np.array([[0.0, 1.0], [1.0, 0.0]])
MINOR_DIAGONAL.flags.writeable = False


@dataclass(frozen=True)
class AngleGrid:
    theta_min: float = -30.0
    theta_max: float = 30.0
    theta_step: float = 1.0
    phi_min: float = -30.0
    phi_max: float = 30.0
    phi_step: float = 1.0

    def __post_init__(self):
        for axis in ("theta", "phi"):
            lo, hi, step = (getattr(self, f"{axis}_{k}") for k in ("min", "max", "step"))
            if not step > 0 or hi < lo:
                raise ValidationError(f"bad {axis} grid: [{lo}, {hi}] step {step}")
            n = (hi - lo) / step
            if abs(n - round(n)) > 1e-9:
                raise ValidationError(f"{axis} range is not a whole number of steps")
            if lo < -90 or hi > 90:
                raise ValidationError(f"{axis} grid must stay within [-90, 90]")

    @staticmethod
    def _axis(lo, hi, step):
        n = int(round((hi - lo) / step)) + 1
        return np.round(lo + step * np.arange(n), 9)

    @property
    def thetas(self) -> np.ndarray:
        return self._axis(self.theta_min, self.theta_max, self.theta_step)

    @property
    def phis(self) -> np.ndarray:
        return self._axis(self.phi_min, self.phi_max, self.phi_step)

    def pairs(self) -> np.ndarray:
        """All (theta, phi) pairs, theta-major, shape ``(G, 2)``."""
        t, p = np.meshgrid(self.thetas, self.phis, indexing="ij")
        return np.stack([t.ravel(), p.ravel()], axis=1)

    @property
    def size(self) -> int:
        return len(self.thetas) * len(self.phis)

    def as_tuple(self) -> tuple:
        return (self.theta_min, self.theta_max, self.theta_step,
                self.phi_min, self.phi_max, self.phi_step)

    @classmethod
    def uniform(cls, lo=-30.0, hi=30.0, step=1.0) -> "AngleGrid":
        return cls(lo, hi, step, lo, hi, step)

    def contains(self, labels) -> np.ndarray:
        labels = np.atleast_2d(labels)
        ok = np.ones(labels.shape[0], dtype=bool)
        for col, (lo, hi, step) in enumerate([self.as_tuple()[:3], self.as_tuple()[3:]]):
            k = (labels[:, col] - lo) / step
            ok &= (np.abs(k - np.round(k)) < 1e-6) & (labels[:, col] >= lo - 1e-9) & (labels[:, col] <= hi + 1e-9)
        return ok


@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to regenerate a dataset bit for bit.

    ``snr_db=None`` produces noise-free samples. ``cover=True`` balances the
    angle pairs so each appears ``samples_total // G`` or one more times;
    otherwise pairs are drawn i.i.d. uniformly from the grid.
    """

    samples_total: int
    snr_db: float | None = 50.0
    seed: int = 0
    grid: AngleGrid = field(default_factory=AngleGrid)
    cover: bool = True
    val_fraction: float = 0.1
    tf_reference: str | None = None

    def __post_init__(self):
        if int(self.samples_total) < 0:
            raise ValidationError("samples_total must be non-negative")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must lie in [0, 1)")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ValidationError("snr_db must be finite or None")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        data = dict(data)
        if "grid" in data and isinstance(data["grid"], dict):
            data["grid"] = AngleGrid(**data["grid"])
        return cls(**data)


@dataclass
class GraphSample:
    x: np.ndarray
    label: tuple[float, float]
    adjacency: np.ndarray = field(default_factory=lambda: MINOR_DIAGONAL)


@dataclass
class DatasetArrays:
    """Whole dataset in memory: ``s`` is ``(n, M)``, ``labels`` ``(n, 2)``."""

    s: np.ndarray
    labels: np.ndarray
    seeds: np.ndarray
    snr_db: float | None
    grid: AngleGrid
    seed: int

    @property
    def num_masks(self) -> int:
        return self.s.shape[1]

    def __len__(self) -> int:
        return self.s.shape[0]

    def graphs(self) -> np.ndarray:
        """Node features for every sample, ``(n, 2, M)``."""
        return np.stack([self.s.real, self.s.imag], axis=1)

    def subset(self, idx) -> "DatasetArrays":
        return DatasetArrays(self.s[idx], self.labels[idx], self.seeds[idx],
                             self.snr_db, self.grid, self.seed)


def to_graph(m: Measurement) -> GraphSample:
    s = np.asarray(m.s)
    return GraphSample(x=np.stack([s.real, s.imag]).astype(np.float64),
                       label=(float(m.truth.theta_deg), float(m.truth.phi_deg)))


def from_graph(sample: GraphSample) -> np.ndarray:
    return sample.x[0] + 1j * sample.x[1]


def sample_seed(seed: int, index: int) -> int:
    """Per-sample seed derived from the dataset seed by counter."""
    return int(np.random.SeedSequence([int(seed), 2, int(index)]).generate_state(1, np.uint64)[0])


def assign_angles(spec: DatasetSpec) -> np.ndarray:
    """Label for every sample, ``(samples_total, 2)``."""
    pairs = spec.grid.pairs()
    g = pairs.shape[0]
    rng = np.random.default_rng([int(spec.seed), 1])
    n = int(spec.samples_total)
    if spec.cover:
        reps, extra = divmod(n, g)
        idx = np.concatenate([np.tile(np.arange(g), reps),
                              rng.choice(g, size=extra, replace=False)]).astype(np.int64)
        rng.shuffle(idx)
    else:
        idx = rng.integers(0, g, size=n)
    return pairs[idx]


def split_indices(labels, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/validation split by angle pair.

    Each pair group contributes ``round(val_fraction * count)`` samples to
    validation. Both index arrays are sorted.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng([int(seed), 3])
    _, group = np.unique(np.round(labels, 6), axis=0, return_inverse=True)
    group = group.ravel()
    val = []
    for gid in range(group.max() + 1 if group.size else 0):
        members = np.flatnonzero(group == gid)
        k = int(round(val_fraction * members.size))
        if k:
            val.append(rng.permutation(members)[:k])
    val_idx = np.sort(np.concatenate(val)) if val else np.empty(0, dtype=np.int64)
    mask = np.ones(labels.shape[0], dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


def _record_dtype(m: int) -> np.dtype:
    return np.dtype([("s", "<c16", (m,)), ("label", "<f8", (2,)), ("seed", "<u8")])


def _header_bytes(m: int, count: int, snr_db, grid: AngleGrid, seed: int) -> bytes:
    snr = math.nan if snr_db is None else float(snr_db)
    return DS_MAGIC + _HEADER.pack(DS_VERSION, m, count, snr, *grid.as_tuple(), int(seed))


def write_dataset(path, data: DatasetArrays) -> int:
    """Write a CDOA-DS file; returns its CRC-64."""
    m = data.num_masks
    rec = np.empty(len(data), dtype=_record_dtype(m))
    rec["s"] = data.s
    rec["label"] = data.labels
    rec["seed"] = data.seeds
    crc = kernels.Crc64()
    with open(path, "wb") as fh:
        for chunk in (_header_bytes(m, len(data), data.snr_db, data.grid, data.seed), rec.tobytes()):
            crc.update(chunk)
            fh.write(chunk)
        checksum = crc.value()
        fh.write(struct.pack("<Q", checksum))
    return checksum


def generate_dataset(spec: DatasetSpec, tf: TransferFunction, path=None) -> DatasetArrays:
    """Simulate ``spec.samples_total`` measurements; persist when ``path`` is given.

    A JSON sidecar (``path + ".json"``) records the DatasetSpec and the
    transfer-function digest.
    """
    digest = tf.digest()
    if spec.tf_reference is not None and spec.tf_reference != digest:
        raise DataMismatchError(
            f"dataset spec is bound to transfer function {spec.tf_reference[:12]}, got {digest[:12]}")
    labels = assign_angles(spec)
    seeds = np.array([sample_seed(spec.seed, i) for i in range(labels.shape[0])], dtype=np.uint64)
    s = measure_batch(tf, labels[:, 0], labels[:, 1], spec.snr_db, seeds)
    data = DatasetArrays(s=s, labels=labels, seeds=seeds, snr_db=spec.snr_db,
                         grid=spec.grid, seed=int(spec.seed))
    if path is not None:
        path = os.fspath(path)
        checksum = write_dataset(path, data)
        sidecar = {"spec": {**spec.to_dict(), "tf_reference": digest},
                   "tf_digest": digest, "num_masks": tf.num_masks,
                   "crc64": f"{checksum:016x}"}
        with open(path + ".json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return data


def read_dataset(path, expect_masks: int | None = None) -> DatasetArrays:
    """Load and verify a whole CDOA-DS file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE + 8 or raw[:len(DS_MAGIC)] != DS_MAGIC:
        raise CorruptFileError(f"{path}: not a dataset file (bad header)")
    version, m, count, snr, *rest = _HEADER.unpack_from(raw, len(DS_MAGIC))
    grid_vals, seed = rest[:6], rest[6]
    if version != DS_VERSION:
        raise CorruptFileError(f"{path}: unsupported version {version}")
    body = raw[:-8]
    (stored,) = struct.unpack("<Q", raw[-8:])
    if kernels.crc64(body) != stored:
        raise CorruptFileError(f"{path}: checksum mismatch (truncated or corrupt)")
    dtype = _record_dtype(m)
    if len(body) - HEADER_SIZE != count * dtype.itemsize:
        raise CorruptFileError(f"{path}: payload size disagrees with header count {count}")
    if expect_masks is not None and m != expect_masks:
        raise DataMismatchError(f"{path}: dataset has M={m}, expected {expect_masks}")
    rec = np.frombuffer(body, dtype=dtype, count=count, offset=HEADER_SIZE)
    return DatasetArrays(s=rec["s"].astype(np.complex128), labels=rec["label"].astype(np.float64),
                         seeds=rec["seed"].astype(np.uint64),
                         snr_db=None if math.isnan(snr) else snr,
                         grid=AngleGrid(*grid_vals), seed=int(seed))


def load_dataset(path, expect_masks: int | None = None) -> Iterator[GraphSample]:
    """Stream graph samples in stored order.

    The checksum is verified before the first sample is produced, so a
    corrupt file never yields partial data.
    """
    data = read_dataset(path, expect_masks)
    return _iter_graphs(data)


def _iter_graphs(data: DatasetArrays) -> Iterator[GraphSample]:
    for s, label in zip(data.s, data.labels):
        yield GraphSample(x=np.stack([s.real, s.imag]), label=(float(label[0]), float(label[1])))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
