"""Matched-filter reconstruction of the projection pattern and grid-search DoA extraction."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .aperture import TransferFunction
from .dataset import AngleGrid
from .errors import NumericError, ValidationError
from .forward import direction_cosines, project_many


@dataclass
class ProjectionEstimate:
    p_est: np.ndarray
    residual_norm: float


@dataclass
class DoaResult:
    theta_deg: float
    phi_deg: float
    peak: float
    correlation: np.ndarray  # (n_theta, n_phi), normalised to [0, 1]
    grid: AngleGrid

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta_deg", "phi_deg", "correlation"])
            for i, t in enumerate(self.grid.thetas):
                for j, p in enumerate(self.grid.phis):
                    w.writerow([f"{t:g}", f"{p:g}", repr(float(self.correlation[i, j]))])


def default_ridge(tf: TransferFunction) -> float:
    e = tf.e_matrix
    return 1e-3 * float(np.vdot(e, e).real) / e.shape[1]


def matched_filter(tf: TransferFunction, s, mode: str = "matched",
                   ridge_lambda: float | None = None) -> ProjectionEstimate:
    """Back-project ``s`` through the conjugate transfer function.

    ``mode="ridge"`` instead solves ``(E^H E + lambda I) p = E^H s`` via the
    ``M x M`` dual system, for diagnostics.
    """
    s = np.asarray(s, dtype=np.complex128)
    e = tf.e_matrix
    if s.shape != (e.shape[0],):
        raise ValidationError(f"measurement has shape {s.shape}, transfer function has M={e.shape[0]}")
    if mode == "matched":
        p = e.conj().T @ s
    elif mode == "ridge":
        lam = default_ridge(tf) if ridge_lambda is None else ridge_lambda
        # (E^H E + lam I)^-1 E^H = E^H (E E^H + lam I)^-1
        gram = e @ e.conj().T + lam * np.eye(e.shape[0])
        p = e.conj().T @ np.linalg.solve(gram, s)
    else:
        raise ValidationError(f"unknown reconstruction mode {mode!r}")
    return ProjectionEstimate(p_est=p, residual_norm=float(np.linalg.norm(e @ p - s)))


def _grid_cosines(grid: AngleGrid):
    pairs = grid.pairs()
    return direction_cosines(pairs[:, 0], pairs[:, 1])


def sensed_atom_norms(tf: TransferFunction, grid: AngleGrid) -> np.ndarray:
    """``|E P(theta, phi)|`` for every grid pair, shaped like the correlation map."""
    return np.linalg.norm(sensed_dictionary(tf, grid), axis=0).reshape(len(grid.thetas), len(grid.phis))


def sensed_dictionary(tf: TransferFunction, grid: AngleGrid, chunk: int = 1024) -> np.ndarray:
    """Noise-free measurement of a unit source at every grid pair, ``(M, G)``."""
    pairs = grid.pairs()
    out = np.empty((tf.num_masks, pairs.shape[0]), dtype=np.complex128)
    for lo in range(0, pairs.shape[0], chunk):
        atoms = project_many(pairs[lo:lo + chunk, 0], pairs[lo:lo + chunk, 1], tf.plane_coords, tf.k0)
        out[:, lo:lo + chunk] = tf.e_matrix @ atoms.T
    return out


def _argmax_lexicographic(values: np.ndarray) -> int:
    # np.argmax returns the first maximum; pairs are theta-major, so the
    # first index is the lexicographically smallest (theta, phi)
    return int(np.argmax(values))


def doa_from_projection(p_est, plane_coords, k0: float, grid: AngleGrid | None = None,
                        atom_norms: np.ndarray | None = None,
                        signal_norm: float | None = None) -> DoaResult:
    """Grid search of the normalised plane-wave correlation with ``p_est``.

    By default each atom is normalised by ``|P| = sqrt(N)``. Passing
    ``atom_norms`` (e.g. from :func:`sensed_atom_norms`) replaces that
    denominator, which turns the score into the classic matched-filter
    statistic ``|<E P, s>| / |E P|``; give ``signal_norm=|s|`` as well to
    keep that map a cosine in [0, 1].
    """
    grid = grid or AngleGrid()
    p_est = np.asarray(p_est, dtype=np.complex128)
    pnorm = float(np.linalg.norm(p_est))
    if pnorm == 0.0:
        raise NumericError("cannot extract a direction from an all-zero projection estimate")
    coords = np.asarray(plane_coords, dtype=np.float64)
    u, v = _grid_cosines(grid)
    inner = np.abs(kernels.plane_wave_correlation(p_est[None], coords[:, 1], coords[:, 2], u, v, k0)[0])
    shape = (len(grid.thetas), len(grid.phis))
    if atom_norms is None:
        corr = inner / (np.sqrt(coords.shape[0]) * pnorm)
    else:
        norms = np.asarray(atom_norms, dtype=np.float64).reshape(-1)
        ref = pnorm if signal_norm is None else float(signal_norm)
        corr = np.divide(inner, norms * ref, out=np.zeros_like(inner), where=norms > 0)
    best = _argmax_lexicographic(corr)
    pairs = grid.pairs()
    return DoaResult(theta_deg=float(pairs[best, 0]), phi_deg=float(pairs[best, 1]),
                     peak=float(corr[best]), correlation=corr.reshape(shape), grid=grid)


class MatchedFilterEstimator:
    """Batch DoA estimator: matched filter followed by sensed-dictionary correlation.

    Scores ``|<E P_g, s>| / |E P_g|``; by the adjoint identity the numerator
    equals ``|<P_g, E^H s>|``, so this is the correlation of the
    back-projection with each plane wave, normalised by its sensed energy.
    ``normalization="plane"`` uses ``|P_g|`` instead.
    """

    def __init__(self, tf: TransferFunction, grid: AngleGrid | None = None,
                 normalization: str = "sensed"):
        if normalization not in ("sensed", "plane"):
            raise ValidationError(f"unknown normalization {normalization!r}")
        self.tf = tf
        self.grid = grid or AngleGrid()
        self.pairs = self.grid.pairs()
        self.dictionary = sensed_dictionary(tf, self.grid)
        if normalization == "sensed":
            self.norms = np.linalg.norm(self.dictionary, axis=0)
        else:
            self.norms = np.full(self.pairs.shape[0], np.sqrt(tf.num_pixels))
        self.normalization = normalization

    def scores(self, s) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=np.complex128))
        inner = np.abs(s @ self.dictionary.conj())
        return np.divide(inner, self.norms, out=np.zeros_like(inner), where=self.norms > 0)

    def __call__(self, s) -> np.ndarray:
        """Estimated ``(theta, phi)`` per row of ``s``, shape ``(B, 2)``."""
        sc = self.scores(s)
        return self.pairs[np.argmax(sc, axis=1)]
