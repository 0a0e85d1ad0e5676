# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, INFINITY
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t _POLY = 0xC96C5795D7870F42ULL
cdef uint64_t _TABLE[256]


cdef void _fill_table():
    cdef int i, j
    cdef uint64_t crc
    for i in range(256):
        crc = i
        for j in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ _POLY
            else:
                crc = crc >> 1
        _TABLE[i] = crc


_fill_table()


def crc64_update(uint64_t crc, data):
    if not isinstance(data, bytes):
        data = bytes(data)
    cdef const unsigned char[::1] buf = data
    cdef Py_ssize_t i, n = buf.shape[0]
    with nogil:
        for i in range(n):
            crc = _TABLE[(crc ^ buf[i]) & 0xFF] ^ (crc >> 8)
    return crc


def greens_matrix(elements, plane, double k):
    cdef double[:, ::1] el = np.ascontiguousarray(elements, dtype=np.float64)
    cdef double[:, ::1] pl = np.ascontiguousarray(plane, dtype=np.float64)
    cdef Py_ssize_t ne = el.shape[0], npx = pl.shape[0], a, b
    out = np.empty((ne, npx), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double dx, dy, dz, r, inv, pol, ph, c, s, re_t, im_t
    with nogil:
        for a in range(ne):
            for b in range(npx):
                dx = pl[b, 0] - el[a, 0]
                dy = pl[b, 1] - el[a, 1]
                dz = pl[b, 2] - el[a, 2]
                r = sqrt(dx * dx + dy * dy + dz * dz)
                inv = 1.0 / r
                pol = -dx * inv
                ph = k * r
                c = cos(ph)
                s = sin(ph)
                # (i k/R - 1/R^2) * (c + i s)
                re_t = -inv * inv * c - k * inv * s
                im_t = k * inv * c - inv * inv * s
                o[a, b] = pol * re_t + 1j * (pol * im_t)
    return out


def min_distance(elements, plane):
    cdef double[:, ::1] el = np.ascontiguousarray(elements, dtype=np.float64)
    cdef double[:, ::1] pl = np.ascontiguousarray(plane, dtype=np.float64)
    cdef Py_ssize_t a, b
    cdef double dx, dy, dz, d2, best = INFINITY
    with nogil:
        for a in range(el.shape[0]):
            for b in range(pl.shape[0]):
                dx = pl[b, 0] - el[a, 0]
                dy = pl[b, 1] - el[a, 1]
                dz = pl[b, 2] - el[a, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best:
                    best = d2
    return sqrt(best)


def plane_wave_correlation(p, y, z, u, v, double k):
    cdef double complex[:, ::1] pv = np.ascontiguousarray(np.atleast_2d(p), dtype=np.complex128)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t nb = pv.shape[0], npx = yv.shape[0], ng = uv.shape[0]
    cdef Py_ssize_t g, j, b
    out = np.zeros((nb, ng), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double ph, c, s, pr, pi
    cdef double[::1] cs = np.empty(npx)
    cdef double[::1] sn = np.empty(npx)
    with nogil:
        for g in range(ng):
            for j in range(npx):
                ph = k * (yv[j] * uv[g] + zv[j] * vv[g])
                cs[j] = cos(ph)
                sn[j] = sin(ph)
            for b in range(nb):
                pr = 0.0
                pi = 0.0
                for j in range(npx):
                    # conj(exp(-i ph)) * p = (c + i s) * p
                    pr = pr + cs[j] * pv[b, j].real - sn[j] * pv[b, j].imag
                    pi = pi + cs[j] * pv[b, j].imag + sn[j] * pv[b, j].real
                o[b, g] = pr + 1j * pi
    return out
