"""Coded-aperture geometry, random masks and the per-mask transfer function."""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .errors import CorruptFileError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0
MU_0 = 4e-7 * math.pi
MIN_DISTANCE_M = 1e-6

TF_MAGIC = b"CDOA-TF\0"
TF_VERSION = 1


@dataclass(frozen=True)
class ApertureConfig:
    """Physical description of the metasurface and its sampling plane.

    ``element_pitch_m`` defaults to half a wavelength and ``standoff_m`` to
    three wavelengths when left as ``None``.
    """

    num_masks: int = 2000
    aperture_size_m: float = 0.25
    frequency_hz: float = 28e9
    element_pitch_m: float | None = None
    standoff_m: float | None = None
    plane_pixels_per_side: int = 47
    element_on_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.num_masks, (int, np.integer)) or self.num_masks < 1:
            raise ValidationError(f"num_masks must be a positive integer, got {self.num_masks!r}")
        if not self.aperture_size_m > 0:
            raise ValidationError("aperture_size_m must be positive")
        if not self.frequency_hz > 0:
            raise ValidationError("frequency_hz must be positive")
        if self.element_pitch_m is not None and not self.element_pitch_m > 0:
            raise ValidationError("element_pitch_m must be positive")
        if self.standoff_m is not None and not self.standoff_m > 0:
            raise ValidationError("standoff_m must be positive")
        if int(self.plane_pixels_per_side) < 1:
            raise ValidationError("plane_pixels_per_side must be >= 1")
        if not 0.0 < self.element_on_probability <= 1.0:
            raise ValidationError("element_on_probability must lie in (0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def k0(self) -> float:
        return 2.0 * math.pi * self.frequency_hz / SPEED_OF_LIGHT

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency_hz

    @property
    def pitch(self) -> float:
        if self.element_pitch_m is None:
            return self.wavelength_m / 2.0
        return float(self.element_pitch_m)

    @property
    def standoff(self) -> float:
        if self.standoff_m is None:
            return 3.0 * self.wavelength_m
        return float(self.standoff_m)

    @property
    def elements_per_side(self) -> int:
        # tolerate roundoff so that e.g. 0.02 / 0.01 gives 2, not 3
        return max(1, math.ceil(self.aperture_size_m / self.pitch - 1e-9))

    @property
    def num_elements(self) -> int:
        return self.elements_per_side**2

    @property
    def num_pixels(self) -> int:
        return int(self.plane_pixels_per_side) ** 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ApertureConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown aperture config keys: {sorted(extra)}")
        return cls(**data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> int:
        digest = hashlib.sha256(self.canonical_json().encode()).digest()
        return int.from_bytes(digest[:8], "big")

    def with_masks(self, num_masks: int) -> "ApertureConfig":
        return replace(self, num_masks=num_masks)


@dataclass
class Mask:
    """One reconfiguration state: a complex weight per element."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.complex128)


@dataclass
class TransferFunction:
    """Sensing operator ``E`` (masks x plane pixels) and its plane geometry."""

    e_matrix: np.ndarray
    plane_coords: np.ndarray
    config_hash: int
    k0: float
    config: ApertureConfig | None = None
    _digest: str | None = field(default=None, repr=False, compare=False)

    @property
    def num_masks(self) -> int:
        return self.e_matrix.shape[0]

    @property
    def num_pixels(self) -> int:
        return self.e_matrix.shape[1]

    def to_bytes(self) -> bytes:
        e = np.ascontiguousarray(self.e_matrix, dtype="<c16")
        buf = io.BytesIO()
        buf.write(TF_MAGIC)
        buf.write(struct.pack("<HII", TF_VERSION, e.shape[0], e.shape[1]))
        buf.write(e.tobytes())
        trailer = {"config": None if self.config is None else self.config.to_dict(),
                   "config_hash": int(self.config_hash), "k0": float(self.k0)}
        if self.config is None:
            trailer["plane_coords"] = np.asarray(self.plane_coords).tolist()
        buf.write(json.dumps(trailer, sort_keys=True, separators=(",", ":")).encode())
        return buf.getvalue()

    def digest(self) -> str:
        """sha256 of the serialized file; the provenance hash used downstream."""
        if self._digest is None:
            self._digest = hashlib.sha256(self.to_bytes()).hexdigest()
        return self._digest


def build_elements(config: ApertureConfig) -> np.ndarray:
    """Element centres on the ``x = 0`` plane as an ``(n, 3)`` array.

    The grid is square, ``elements_per_side`` on a side, uniformly spaced at
    the pitch and centred on the origin; raster order is row-major over
    (y, z).
    """
    n = config.elements_per_side
    axis = (np.arange(n) - (n - 1) / 2.0) * config.pitch
    yy, zz = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([np.zeros(n * n), yy.ravel(), zz.ravel()], axis=1)


def build_plane(config: ApertureConfig) -> np.ndarray:
    """Sampling-plane pixel centres at ``x = standoff`` spanning the aperture."""
    n = int(config.plane_pixels_per_side)
    spacing = config.aperture_size_m / n
    axis = (np.arange(n) - (n - 1) / 2.0) * spacing
    yy, zz = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([np.full(n * n, config.standoff), yy.ravel(), zz.ravel()], axis=1)


def sample_masks(config: ApertureConfig) -> list[Mask]:
    rng = np.random.default_rng(config.seed)
    shape = (config.num_masks, config.num_elements)
    on = rng.random(shape) < config.element_on_probability
    phase = rng.random(shape) * (2.0 * math.pi)
    weights = np.where(on, np.exp(1j * phase), 0.0)
    return [Mask(w) for w in weights]


def compute_transfer_function(config: ApertureConfig, masks: list[Mask]) -> TransferFunction:
    """Evaluate the dipole-sum field of every mask over the sampling plane.

    Rows follow ``masks``; columns follow the plane raster. The field is
    linear in the mask weights, so it is assembled as ``W @ G`` where
    ``G`` holds the per-element kernel at each pixel.
    """
    if not masks:
        raise ValidationError("at least one mask is required")
    elements = build_elements(config)
    plane = build_plane(config)
    weights = np.stack([m.weights for m in masks])
    if weights.shape[1] != elements.shape[0]:
        raise ValidationError(
            f"mask length {weights.shape[1]} does not match element count {elements.shape[0]}")
    if kernels.min_distance(elements, plane) < MIN_DISTANCE_M:
        raise ValidationError("a plane pixel coincides with an element (R < 1e-6 m)")
    g = kernels.greens_matrix(elements, plane, config.k0)
    prefactor = 1j * config.omega * MU_0 / (4.0 * math.pi)
    e = prefactor * (weights @ g)
    return TransferFunction(e_matrix=e, plane_coords=plane, config_hash=config.config_hash(),
                            k0=config.k0, config=config)


def build_transfer_function(config: ApertureConfig) -> TransferFunction:
    return compute_transfer_function(config, sample_masks(config))


@dataclass
class DiversityReport:
    correlations: np.ndarray
    singular_values: np.ndarray

    @property
    def median_offdiagonal(self) -> float:
        m = self.correlations.shape[0]
        off = self.correlations[~np.eye(m, dtype=bool)]
        return float(np.median(off))

    @property
    def condition_number(self) -> float:
        sv = self.singular_values
        return float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf


def mask_diversity(tf: TransferFunction) -> DiversityReport:
    """Normalised row-correlation magnitudes and the singular values of E."""
    e = np.asarray(tf.e_matrix)
    if e.shape[0] < 2:
        raise ValidationError("mask diversity needs at least two masks")
    norms = np.linalg.norm(e, axis=1)
    gram = np.abs(e @ e.conj().T)
    denom = np.outer(norms, norms)
    corr = np.divide(gram, denom, out=np.zeros_like(gram), where=denom > 0)
    sv = np.linalg.svd(e, compute_uv=False)
    return DiversityReport(correlations=corr, singular_values=np.sort(sv)[::-1])


def save_transfer_function(tf: TransferFunction, path) -> str:
    """Write the CDOA-TF file and return its sha256 hex digest."""
    data = tf.to_bytes()
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load_transfer_function(path) -> TransferFunction:
    with open(path, "rb") as fh:
        data = fh.read()
    header = len(TF_MAGIC) + struct.calcsize("<HII")
    if len(data) < header or data[:len(TF_MAGIC)] != TF_MAGIC:
        raise CorruptFileError(f"{path}: not a transfer-function file")
    version, m, n = struct.unpack_from("<HII", data, len(TF_MAGIC))
    if version != TF_VERSION:
        raise CorruptFileError(f"{path}: unsupported version {version}")
    end = header + 16 * m * n
    if len(data) < end:
        raise CorruptFileError(f"{path}: truncated matrix payload")
    e = np.frombuffer(data, dtype="<c16", count=m * n, offset=header).reshape(m, n).astype(np.complex128)
    try:
        trailer = json.loads(data[end:].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"{path}: bad config trailer") from exc
    config = None
    if trailer.get("config") is not None:
        config = ApertureConfig.from_dict(trailer["config"])
        plane = build_plane(config)
    else:
        plane = np.asarray(trailer["plane_coords"], dtype=np.float64)
    if plane.shape[0] != n:
        raise CorruptFileError(f"{path}: plane has {plane.shape[0]} pixels, matrix has {n}")
    tf = TransferFunction(e_matrix=e, plane_coords=plane, config_hash=int(trailer["config_hash"]),
                          k0=float(trailer["k0"]), config=config)
    tf._digest = hashlib.sha256(data).hexdigest()
    return tf
