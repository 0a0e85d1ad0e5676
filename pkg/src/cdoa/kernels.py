"""Kernel backend selection.

The compiled extension is used when importable. Set ``CDOA_KERNELS=python``
to force the numpy fallback, or ``CDOA_KERNELS=compiled`` to fail loudly
when the extension is missing.
"""

import os

from . import _kernels_py

_choice = os.environ.get("CDOA_KERNELS", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"CDOA_KERNELS must be auto, python or compiled, got {_choice!r}")

_impl = _kernels_py
BACKEND = "python"
if _choice != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _kernels_py

crc64_update = _impl.crc64_update
greens_matrix = _impl.greens_matrix
min_distance = _impl.min_distance
plane_wave_correlation = _impl.plane_wave_correlation

CRC64_INIT = 0xFFFFFFFFFFFFFFFF


def crc64(data):
    """CRC-64/XZ of ``data``."""
    return crc64_update(CRC64_INIT, data) ^ CRC64_INIT


class Crc64:
    """Incremental CRC-64/XZ accumulator."""

    def __init__(self):
        self._reg = CRC64_INIT

    def update(self, data):
        self._reg = crc64_update(self._reg, data)
        return self

    def value(self):
        return self._reg ^ CRC64_INIT
