"""Far-field projection onto the sampling plane and noisy single-channel measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aperture import TransferFunction
from .errors import NumericError, ValidationError

NOISELESS = None  # snr_db sentinel for noise-free measurements


@dataclass(frozen=True)
class SourceAngle:
    """Incident direction in degrees: ``theta`` elevation, ``phi`` azimuth."""

    theta_deg: float
    phi_deg: float

    def __post_init__(self):
        for name in ("theta_deg", "phi_deg"):
            val = getattr(self, name)
            if not (math.isfinite(val) and -90.0 <= val <= 90.0):
                raise ValidationError(f"{name} must lie in [-90, 90], got {val!r}")

    def as_tuple(self) -> tuple[float, float]:
        return (self.theta_deg, self.phi_deg)


@dataclass
class Measurement:
    s: np.ndarray
    truth: SourceAngle
    snr_db: float | None
    seed: int


def direction_cosines(theta_deg, phi_deg):
    """Return ``(sin t cos p, sin t sin p)``, the y and z phase slopes."""
    t = np.deg2rad(theta_deg)
    p = np.deg2rad(phi_deg)
    return np.sin(t) * np.cos(p), np.sin(t) * np.sin(p)


def project_source(angle: SourceAngle, plane_coords, k0: float) -> np.ndarray:
    """Plane-wave phase pattern of a far-field source across the plane pixels."""
    if not k0 > 0:
        raise ValidationError("k0 must be positive")
    coords = np.asarray(plane_coords, dtype=np.float64)
    u, v = direction_cosines(angle.theta_deg, angle.phi_deg)
    return np.exp(-1j * k0 * (coords[:, 1] * u + coords[:, 2] * v))


def project_many(theta_deg, phi_deg, plane_coords, k0: float) -> np.ndarray:
    """Vectorised :func:`project_source`; returns ``(len(theta), N)``."""
    coords = np.asarray(plane_coords, dtype=np.float64)
    u, v = direction_cosines(np.asarray(theta_deg, float), np.asarray(phi_deg, float))
    phase = np.outer(u, coords[:, 1]) + np.outer(v, coords[:, 2])
    return np.exp(-1j * k0 * phase)


def noise_sigma2(clean: np.ndarray, snr_db: float) -> float:
    """Per-entry complex noise variance giving ``snr_db`` against mean signal power."""
    power = float(np.vdot(clean, clean).real) / clean.shape[0]
    if power == 0.0:
        raise NumericError("cannot set a finite SNR on an all-zero signal (|EP| = 0)")
    return power / 10.0 ** (snr_db / 10.0)


def add_noise(clean: np.ndarray, snr_db: float | None, rng: np.random.Generator) -> np.ndarray:
    if snr_db is NOISELESS:
        return clean.copy()
    sigma = math.sqrt(noise_sigma2(clean, snr_db) / 2.0)
    n = clean.shape[0]
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return clean + sigma * noise


def measure(tf: TransferFunction, angle: SourceAngle, snr_db: float | None, seed: int) -> Measurement:
    """``s = E P + n`` for one source; ``snr_db=None`` gives ``n = 0``."""
    p = project_source(angle, tf.plane_coords, tf.k0)
    clean = tf.e_matrix @ p
    s = add_noise(clean, snr_db, np.random.default_rng(seed))
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite measurement")
    return Measurement(s=s, truth=angle, snr_db=snr_db, seed=seed)


def superpose(tf: TransferFunction, angles: list[SourceAngle]) -> np.ndarray:
    """Noise-free measurement of several simultaneous unit sources."""
    p = sum(project_source(a, tf.plane_coords, tf.k0) for a in angles)
    return tf.e_matrix @ p


def empirical_snr(clean, noisy) -> float:
    """``10 log10(|clean|^2 / |noisy - clean|^2)``; ``inf`` for an exact match."""
    clean = np.asarray(clean)
    noisy = np.asarray(noisy)
    if clean.shape != noisy.shape:
        raise ValidationError("clean and noisy vectors differ in length")
    signal = float(np.vdot(clean, clean).real)
    if signal == 0.0:
        raise NumericError("clean signal is all zero")
    resid = noisy - clean
    noise = float(np.vdot(resid, resid).real)
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def measure_batch(tf: TransferFunction, theta_deg, phi_deg, snr_db: float | None, seeds,
                  chunk: int = 512) -> np.ndarray:
    """Measurements for many sources at once, ``(B, M)``.

    Sample ``b`` draws its noise from ``default_rng(seeds[b])`` exactly as
    :func:`measure` does; the clean part is computed blockwise and agrees
    with :func:`measure` to roundoff.
    """
    theta = np.asarray(theta_deg, dtype=np.float64)
    phi = np.asarray(phi_deg, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty((theta.shape[0], tf.num_masks), dtype=np.complex128)
    et = np.ascontiguousarray(tf.e_matrix.T)
    for lo in range(0, theta.shape[0], chunk):
        hi = min(lo + chunk, theta.shape[0])
        clean = project_many(theta[lo:hi], phi[lo:hi], tf.plane_coords, tf.k0) @ et
        for b in range(hi - lo):
            rng = np.random.default_rng(int(seeds[lo + b]))
            out[lo + b] = add_noise(clean[b], snr_db, rng)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite measurement")
    return out
