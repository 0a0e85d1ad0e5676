"""Finite-difference gradient checking for tiny GAT instances."""

import numpy as np

from cdoa.dataset import MINOR_DIAGONAL
from cdoa.gatnet import backward, forward, init_model, loss

FULL3 = np.ones((3, 3)) - np.eye(3)


def randomize(model, rng, scale=0.6):
    # nonzero biases so ReLU gates differ across nodes
    for k, v in model.params.items():
        model.params[k] = rng.normal(scale=scale, size=v.shape)
    return model


def _kink_margin(model, x, y, adjacency):
    _, caches = forward(model, x, adjacency, keep_cache=True)
    vals = [np.abs(forward(model, x, adjacency) - y).min()]
    n_gal = len(model.gal_widths)
    for c in caches[:n_gal]:
        _, _, pre, _, agg, mask = c
        vals += [np.abs(pre[:, mask]).min(), np.abs(agg).min()]
    for c in caches[n_gal + 1:-1]:
        vals.append(np.abs(c[1]).min())
    return min(vals)


def gradcheck_instance(seed):
    rng = np.random.default_rng(seed)
    k = 2 if seed % 2 == 0 else 3
    m = int(rng.integers(2, 5))
    widths = tuple(int(w) for w in rng.integers(2, 5, size=4))
    dense = tuple(int(w) for w in rng.integers(2, 5, size=3)) + (2,)
    adjacency = MINOR_DIAGONAL if k == 2 else FULL3
    while True:
        model = randomize(init_model(m, seed=seed, gal_widths=widths, dense_widths=dense,
                                      l2_lambda=1e-3, num_nodes=k), rng)
        x = rng.normal(size=(3, k, m))
        y = rng.normal(scale=3.0, size=(3, 2))
        if _kink_margin(model, x, y, adjacency) > 1e-3:
            return model, x, y, adjacency


def max_gradcheck_error(model, x, y, adjacency, h=1e-5):
    _, grads = backward(model, x, y, adjacency)
    worst = 0.0
    for name, arr in model.params.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss(model, x, y, adjacency)
            arr[idx] = old - h
            down = loss(model, x, y, adjacency)
            arr[idx] = old
            fd = (up - down) / (2 * h)
            g = grads[name][idx]
            worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), 1e-6))
    return worst
