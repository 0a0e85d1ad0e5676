"""Loop-by-loop reference evaluation of the GAT, independent of the batched code."""

import math

import numpy as np


def leaky(v, slope=0.2):
    return v if v > 0 else slope * v


def gal(w, attn, bias, x, adjacency):
    k = x.shape[0]
    fo = w.shape[0]
    h = [w @ x[i] for i in range(k)]
    out = np.zeros((k, fo))
    alphas = np.zeros((k, k))
    for i in range(k):
        nbrs = [j for j in range(k) if adjacency[i][j]]
        scores = [leaky(float(attn[:fo] @ h[i] + attn[fo:] @ h[j])) for j in nbrs]
        ex = [math.exp(c) for c in scores]
        agg = np.array(bias, dtype=float)
        for j, e in zip(nbrs, ex):
            alphas[i, j] = e / sum(ex)
            agg = agg + alphas[i, j] * h[j]
        out[i] = np.maximum(agg, 0.0)
    return out, alphas


def pool(p, z):
    ex = [math.exp(float(p @ zi)) for zi in z]
    tot = sum(ex)
    return sum((e / tot) * zi for e, zi in zip(ex, z))


def model(params, x, adjacency, n_dense=4, normalize=True, dense_only=False):
    x = np.array(x, dtype=float)
    if normalize:
        rms = math.sqrt(float(np.mean(x * x)))
        x = x / rms if rms > 0 else x
    if dense_only:
        h = x.reshape(-1)
    else:
        h = x
        for layer in range(4):
            h, _ = gal(params[f"gal{layer}.w"], params[f"gal{layer}.attn"], params[f"gal{layer}.bias"],
                       h, adjacency)
        h = pool(params["pool"], h)
    for d in range(n_dense):
        h = params[f"dense{d}.w"] @ h + params[f"dense{d}.b"]
        if d < n_dense - 1:
            h = np.maximum(h, 0.0)
    return h
