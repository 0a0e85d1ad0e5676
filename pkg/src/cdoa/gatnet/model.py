"""GAT regressor: 4 graph-attention layers, attention pooling, 4 dense layers.

Parameters live in one ordered ``dict`` so that the optimiser, the
checkpoint writer and the gradient checks all share a single ordering::

    gal{l}.w     (F'_l, F'_{l-1})    with F'_{-1} = M
    gal{l}.attn  (2 F'_l,)
    gal{l}.bias  (F'_l,)
    pool         (F'_3,)
    dense{d}.w   (D_d, D_{d-1})      with D_{-1} = F'_3
    dense{d}.b   (D_d,)

The dense-only baseline drops the ``gal*`` and ``pool`` entries and feeds
the flattened ``(2M,)`` node features straight into the dense head.

Total parameter count (GAT mode)::

    sum_l [F'_l (F'_{l-1} + 3)] + F'_3 + sum_d [D_d (D_{d-1} + 1)]
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..dataset import MINOR_DIAGONAL, GraphSample
from ..errors import DataMismatchError, NumericError, ValidationError
from . import layers

DEFAULT_GAL_WIDTHS = (256, 128, 64, 32)
DEFAULT_DENSE_WIDTHS = (64, 32, 16, 2)
NUM_GALS = 4
NUM_DENSE = 4


@dataclass
class GatModel:
    num_features: int
    gal_widths: tuple[int, ...]
    dense_widths: tuple[int, ...]
    params: dict[str, np.ndarray]
    l2_lambda: float = 5e-4
    rng_seed: int = 0
    dense_only: bool = False
    normalize_input: bool = True
    leaky_slope: float = layers.LEAKY_SLOPE
    num_nodes: int = 2
    extra: dict = field(default_factory=dict)

    def copy(self) -> "GatModel":
        return copy.deepcopy(self)

    @property
    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def weight_names(self) -> list[str]:
        """Parameters under the L2 penalty: everything except biases."""
        return [k for k in self.params if not (k.endswith(".bias") or k.endswith(".b"))]


def parameter_count(num_features, gal_widths=DEFAULT_GAL_WIDTHS, dense_widths=DEFAULT_DENSE_WIDTHS,
                    dense_only=False, num_nodes=2) -> int:
    total = 0
    if dense_only:
        prev = num_nodes * num_features
    else:
        prev = num_features
        for fo in gal_widths:
            total += fo * (prev + 3)
            prev = fo
        total += prev
    for d in dense_widths:
        total += d * (prev + 1)
        prev = d
    return total


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(num_features: int, seed: int = 0, gal_widths=DEFAULT_GAL_WIDTHS,
               dense_widths=DEFAULT_DENSE_WIDTHS, l2_lambda: float = 5e-4,
               dense_only: bool = False, normalize_input: bool = True,
               num_nodes: int = 2) -> GatModel:
    """Glorot-uniform weights and zero biases, drawn in parameter order."""
    gal_widths = tuple(int(w) for w in gal_widths)
    dense_widths = tuple(int(w) for w in dense_widths)
    if not dense_only and len(gal_widths) != NUM_GALS:
        raise ValidationError(f"need exactly {NUM_GALS} GAL widths, got {len(gal_widths)}")
    if len(dense_widths) != NUM_DENSE or dense_widths[-1] != 2:
        raise ValidationError(f"need {NUM_DENSE} dense widths ending in 2, got {dense_widths}")
    if num_features < 1 or min(gal_widths + dense_widths) < 1:
        raise ValidationError("layer widths must be positive")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    if dense_only:
        prev = num_nodes * num_features
    else:
        prev = num_features
        for i, fo in enumerate(gal_widths):
            params[f"gal{i}.w"] = _glorot(rng, prev, fo, (fo, prev))
            params[f"gal{i}.attn"] = _glorot(rng, 2 * fo, 1, (2 * fo,))
            params[f"gal{i}.bias"] = np.zeros(fo)
            prev = fo
        params["pool"] = _glorot(rng, prev, 1, (prev,))
    for i, d in enumerate(dense_widths):
        params[f"dense{i}.w"] = _glorot(rng, prev, d, (d, prev))
        params[f"dense{i}.b"] = np.zeros(d)
        prev = d
    return GatModel(num_features=int(num_features), gal_widths=() if dense_only else gal_widths,
                    dense_widths=dense_widths, params=params, l2_lambda=float(l2_lambda),
                    rng_seed=int(seed), dense_only=dense_only, normalize_input=normalize_input,
                    num_nodes=num_nodes)


def normalize_nodes(x: np.ndarray) -> np.ndarray:
    """Scale each sample to unit RMS over all its node features."""
    rms = np.sqrt(np.mean(x * x, axis=(-2, -1), keepdims=True))
    return np.divide(x, rms, out=np.zeros_like(x), where=rms > 0)


def _check_input(model: GatModel, x: np.ndarray):
    if x.ndim != 3:
        raise ValidationError(f"expected node features of shape (B, K, F), got {x.shape}")
    if x.shape[-1] != model.num_features:
        raise DataMismatchError(
            f"input has {x.shape[-1]} features per node, model was built for M={model.num_features}")
    layers.check_finite(x, "input")


def forward(model: GatModel, x, adjacency=MINOR_DIAGONAL, keep_cache=False):
    """Batched forward pass; ``x`` is ``(B, K, M)``. Returns ``(B, 2)`` and caches."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(model, x)
    p = model.params
    h = normalize_nodes(x) if model.normalize_input else x
    caches = []
    if model.dense_only:
        h = h.reshape(h.shape[0], -1)
    else:
        for i in range(len(model.gal_widths)):
            h, c = layers.gal_forward(p[f"gal{i}.w"], p[f"gal{i}.attn"], p[f"gal{i}.bias"],
                                      h, adjacency, model.leaky_slope)
            layers.check_finite(h, f"gal{i}")
            caches.append(c)
        h, c = layers.pool_forward(p["pool"], h)
        layers.check_finite(h, "pool")
        caches.append(c)
    last = len(model.dense_widths) - 1
    for i in range(len(model.dense_widths)):
        h, c = layers.dense_forward(p[f"dense{i}.w"], p[f"dense{i}.b"], h, relu=i < last)
        layers.check_finite(h, f"dense{i}")
        caches.append(c)
    return (h, caches) if keep_cache else h


def attention_weights(model: GatModel, x, adjacency=MINOR_DIAGONAL) -> list[np.ndarray]:
    """Per-GAL attention matrices ``(B, K, K)`` for a batch."""
    _, caches = forward(model, x, adjacency, keep_cache=True)
    return [c[3] for c in caches[:len(model.gal_widths)]]


def predict(model: GatModel, x, adjacency=MINOR_DIAGONAL, batch_size: int = 4096) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = [forward(model, x[lo:lo + batch_size], adjacency) for lo in range(0, x.shape[0], batch_size)]
    return np.concatenate(out) if out else np.empty((0, 2))


def model_forward(model: GatModel, sample: GraphSample) -> tuple[float, float]:
    out = forward(model, sample.x[None], sample.adjacency)[0]
    return float(out[0]), float(out[1])


def l2_penalty(model: GatModel) -> float:
    return model.l2_lambda * float(sum(np.sum(model.params[k] ** 2) for k in model.weight_names()))


def loss(model: GatModel, x, y, adjacency=MINOR_DIAGONAL) -> float:
    """MAE over batch and both angles plus the L2 penalty on weights."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] == 0:
        raise ValidationError("loss needs a nonempty batch")
    pred = forward(model, x, adjacency)
    return float(np.mean(np.abs(pred - y))) + l2_penalty(model)


def backward(model: GatModel, x, y, adjacency=MINOR_DIAGONAL) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its exact gradient with respect to every parameter.

    Subgradients: ``sign(0) = 0`` for the absolute error, ``relu'(0) = 0``,
    and the leaky-ReLU kink takes the negative-side slope.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] == 0:
        raise ValidationError("backward needs a nonempty batch")
    pred, caches = forward(model, x, adjacency, keep_cache=True)
    p = model.params
    value = float(np.mean(np.abs(pred - y))) + l2_penalty(model)
    grads: dict[str, np.ndarray] = {}
    g = np.sign(pred - y) / pred.size
    n_dense = len(model.dense_widths)
    dense_caches = caches[-n_dense:]
    for i in reversed(range(n_dense)):
        dw, db, g = layers.dense_backward(p[f"dense{i}.w"], dense_caches[i], g)
        grads[f"dense{i}.w"], grads[f"dense{i}.b"] = dw, db
        layers.check_finite(g, f"dense{i} backward")
    if not model.dense_only:
        n_gal = len(model.gal_widths)
        grads["pool"], g = layers.pool_backward(p["pool"], caches[n_gal], g)
        layers.check_finite(g, "pool backward")
        for i in reversed(range(n_gal)):
            dw, dattn, dbias, g = layers.gal_backward(p[f"gal{i}.w"], p[f"gal{i}.attn"], caches[i], g,
                                                      model.leaky_slope)
            grads[f"gal{i}.w"], grads[f"gal{i}.attn"], grads[f"gal{i}.bias"] = dw, dattn, dbias
            layers.check_finite(dw, f"gal{i} backward")
    for name in model.weight_names():
        grads[name] = grads[name] + 2.0 * model.l2_lambda * p[name]
    for name, arr in grads.items():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient for {name}")
    return value, {k: grads[k] for k in p}
