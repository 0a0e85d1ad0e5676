"""CDOA-NN checkpoint format.

Layout (little-endian)::

    magic "CDOA-NN\\0" | u16 version | u8 flags | u32 M | u32 K
    u32 n_gal | u32 x n_gal widths | u32 n_dense | u32 x n_dense widths
    f64 l2_lambda | f64 leaky_slope | u64 rng_seed
    f64 parameters, each array row-major, in GatModel.params order

flags bit 0: dense-only baseline; bit 1: per-sample input normalisation.
"""

from __future__ import annotations

import hashlib
import io
import struct

import numpy as np

from ..errors import CorruptFileError
from .model import GatModel, init_model

NN_MAGIC = b"CDOA-NN\0"
NN_VERSION = 1


def model_bytes(model: GatModel) -> bytes:
    buf = io.BytesIO()
    flags = (1 if model.dense_only else 0) | (2 if model.normalize_input else 0)
    buf.write(NN_MAGIC)
    buf.write(struct.pack("<HBII", NN_VERSION, flags, model.num_features, model.num_nodes))
    for widths in (model.gal_widths, model.dense_widths):
        buf.write(struct.pack(f"<I{len(widths)}I", len(widths), *widths))
    buf.write(struct.pack("<ddQ", model.l2_lambda, model.leaky_slope, model.rng_seed))
    for arr in model.params.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def model_digest(model: GatModel) -> str:
    return hashlib.sha256(model_bytes(model)).hexdigest()


def save_model(model: GatModel, path) -> str:
    data = model_bytes(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load_model(path) -> GatModel:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return _parse(data)
    except struct.error as exc:
        raise CorruptFileError(f"{path}: truncated checkpoint") from exc


def _parse(data: bytes) -> GatModel:
    if data[:len(NN_MAGIC)] != NN_MAGIC:
        raise CorruptFileError("not a CDOA-NN checkpoint")
    off = len(NN_MAGIC)
    version, flags, m, k = struct.unpack_from("<HBII", data, off)
    off += struct.calcsize("<HBII")
    if version != NN_VERSION:
        raise CorruptFileError(f"unsupported checkpoint version {version}")
    widths = []
    for _ in range(2):
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        widths.append(struct.unpack_from(f"<{n}I", data, off))
        off += 4 * n
    l2, slope, seed = struct.unpack_from("<ddQ", data, off)
    off += struct.calcsize("<ddQ")
    dense_only = bool(flags & 1)
    model = init_model(m, seed=0, gal_widths=widths[0] if not dense_only else (1, 1, 1, 1),
                       dense_widths=widths[1], l2_lambda=l2, dense_only=dense_only,
                       normalize_input=bool(flags & 2), num_nodes=k)
    model.leaky_slope = slope
    model.rng_seed = seed
    total = sum(p.size for p in model.params.values())
    if len(data) - off != 8 * total:
        raise CorruptFileError(f"checkpoint holds {(len(data) - off) // 8} values, architecture needs {total}")
    flat = np.frombuffer(data, dtype="<f8", count=total, offset=off)
    pos = 0
    for name, arr in model.params.items():
        model.params[name] = flat[pos:pos + arr.size].reshape(arr.shape).astype(np.float64)
        pos += arr.size
    return model
