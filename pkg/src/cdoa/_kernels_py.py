"""Pure numpy / pure Python versions of the hot kernels.

These are the reference implementations; ``_kernels.pyx`` mirrors them
with fused loops. Both must agree to floating-point roundoff.
"""

import numpy as np

_CRC64_POLY = 0xC96C5795D7870F42  # ECMA-182, reflected (CRC-64/XZ)


def _make_crc_table():
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC64_POLY if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _make_crc_table()


def crc64_update(crc, data):
    """Feed ``data`` into a running CRC-64/XZ register (pre-inverted form).

    Start from ``0xFFFFFFFFFFFFFFFF`` and xor the final register with the
    same value to get the checksum.
    """
    table = _CRC_TABLE
    for b in bytes(data):
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc


def greens_matrix(elements, plane, k):
    """Scalar dipole kernel between every element and every plane pixel.

    Returns an ``(n_elements, n_pixels)`` complex array with entries
    ``-(dx/R) * (1j*k/R - 1/R**2) * exp(1j*k*R)``, the z-component of
    ``y_hat x r_hat`` times the near/far-field radial term.
    """
    elements = np.asarray(elements, dtype=np.float64)
    plane = np.asarray(plane, dtype=np.float64)
    out = np.empty((elements.shape[0], plane.shape[0]), dtype=np.complex128)
    # chunk over elements to bound the temporaries
    step = max(1, 2_000_000 // max(1, plane.shape[0]))
    for lo in range(0, elements.shape[0], step):
        el = elements[lo:lo + step]
        d = plane[None, :, :] - el[:, None, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        pol = -d[..., 0] / r
        out[lo:lo + step] = pol * (1j * k / r - 1.0 / r**2) * np.exp(1j * k * r)
    return out


def min_distance(elements, plane):
    """Smallest element-to-pixel distance."""
    elements = np.asarray(elements, dtype=np.float64)
    plane = np.asarray(plane, dtype=np.float64)
    best = np.inf
    step = max(1, 2_000_000 // max(1, plane.shape[0]))
    for lo in range(0, elements.shape[0], step):
        d = plane[None, :, :] - elements[lo:lo + step, None, :]
        best = min(best, float(np.sqrt(np.einsum("ijk,ijk->ij", d, d).min())))
    return best


def plane_wave_correlation(p, y, z, u, v, k):
    """Inner products ``<P(u_g, v_g), p_b>`` for a batch of vectors.

    ``P(u, v)[j] = exp(-1j*k*(y_j*u + z_j*v))``. ``p`` is ``(B, N)``;
    the result is ``(B, G)`` with ``sum_j conj(P_g[j]) * p_b[j]``.
    """
    p = np.atleast_2d(np.asarray(p, dtype=np.complex128))
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    out = np.empty((p.shape[0], u.shape[0]), dtype=np.complex128)
    step = max(1, 4_000_000 // max(1, y.shape[0]))
    for lo in range(0, u.shape[0], step):
        phase = np.outer(u[lo:lo + step], y) + np.outer(v[lo:lo + step], z)
        atoms_conj = np.exp(1j * k * phase)
        out[:, lo:lo + step] = p @ atoms_conj.T
    return out
