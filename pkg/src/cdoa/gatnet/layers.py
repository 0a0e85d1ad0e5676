"""Batched graph-attention, attention-pooling and dense layers with exact backward passes.

Node features are laid out ``(B, K, F)``: batch, node, feature. Each
``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
consumes the cache and the upstream gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ValidationError

LEAKY_SLOPE = 0.2


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x, slope=LEAKY_SLOPE):
    # kink at 0 takes the negative-side slope
    return np.where(x > 0, 1.0, slope)


def neighbour_mask(adjacency) -> np.ndarray:
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ValidationError("adjacency must be binary")
    return a.astype(bool)


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row softmax of ``scores`` (..., K, K) restricted to ``mask``.

    Entries outside the neighbourhood are exactly zero; a node without
    neighbours gets an all-zero row.
    """
    masked = np.where(mask, scores, -np.inf)
    top = masked.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    ex = np.where(mask, np.exp(masked - top), 0.0)
    denom = ex.sum(axis=-1, keepdims=True)
    return np.divide(ex, denom, out=np.zeros_like(ex), where=denom > 0)


def gal_forward(w, attn, bias, x, adjacency, slope=LEAKY_SLOPE):
    """Single-head graph attention layer followed by ReLU.

    ``w`` is ``(F', F)``, ``attn`` ``(2F',)``, ``bias`` ``(F',)`` and ``x``
    ``(B, K, F)``. Scores are ``leaky(attn . [h_i || h_j])``.
    """
    mask = neighbour_mask(adjacency)
    if x.shape[-2] != mask.shape[0]:
        raise ValidationError(f"x has {x.shape[-2]} nodes but adjacency is {mask.shape}")
    if x.shape[-1] != w.shape[1]:
        raise ValidationError(f"x has {x.shape[-1]} features, layer expects {w.shape[1]}")
    fo = w.shape[0]
    h = x @ w.T
    e_src = h @ attn[:fo]
    e_dst = h @ attn[fo:]
    pre = e_src[..., :, None] + e_dst[..., None, :]
    alpha = masked_softmax(leaky_relu(pre, slope), mask)
    agg = alpha @ h + bias
    z = np.maximum(agg, 0.0)
    cache = (x, h, pre, alpha, agg, mask)
    return z, cache


def gal_backward(w, attn, cache, dz, slope=LEAKY_SLOPE):
    x, h, pre, alpha, agg, mask = cache
    fo = w.shape[0]
    dagg = dz * (agg > 0)
    dbias = dagg.sum(axis=tuple(range(dagg.ndim - 1)))
    dh = np.swapaxes(alpha, -1, -2) @ dagg
    dalpha = dagg @ np.swapaxes(h, -1, -2)
    dscore = alpha * (dalpha - (alpha * dalpha).sum(axis=-1, keepdims=True))
    dpre = np.where(mask, dscore * leaky_relu_grad(pre, slope), 0.0)
    de_src = dpre.sum(axis=-1)
    de_dst = dpre.sum(axis=-2)
    dh += de_src[..., None] * attn[:fo] + de_dst[..., None] * attn[fo:]
    flat_h = h.reshape(-1, fo)
    dattn = np.concatenate([de_src.reshape(-1) @ flat_h, de_dst.reshape(-1) @ flat_h])
    flat_dh = dh.reshape(-1, fo)
    dw = flat_dh.T @ x.reshape(-1, x.shape[-1])
    dx = dh @ w
    return dw, dattn, dbias, dx


def pool_forward(pool, z):
    """Global attention pooling: softmax over nodes of ``pool . z_i``."""
    if z.shape[-1] != pool.shape[0]:
        raise ValidationError(f"pool expects {pool.shape[0]} features, got {z.shape[-1]}")
    u = z @ pool
    u = u - u.max(axis=-1, keepdims=True)
    ex = np.exp(u)
    beta = ex / ex.sum(axis=-1, keepdims=True)
    out = (beta[..., None] * z).sum(axis=-2)
    return out, (z, beta)


def pool_backward(pool, cache, dout):
    z, beta = cache
    dz = beta[..., None] * dout[..., None, :]
    dbeta = (z * dout[..., None, :]).sum(axis=-1)
    du = beta * (dbeta - (beta * dbeta).sum(axis=-1, keepdims=True))
    dz += du[..., None] * pool
    dpool = du.reshape(-1) @ z.reshape(-1, z.shape[-1])
    return dpool, dz


def dense_forward(w, b, x, relu: bool):
    a = x @ w.T + b
    out = np.maximum(a, 0.0) if relu else a
    return out, (x, a, relu)


def dense_backward(w, cache, dout):
    x, a, relu = cache
    da = dout * (a > 0) if relu else dout
    dw = da.T @ x
    db = da.sum(axis=0)
    dx = da @ w
    return dw, db, dx


def check_finite(arr, where: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {where}")
