import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gat_oracle
from gradcheck import FULL3, gradcheck_instance, randomize, max_gradcheck_error
from cdoa.dataset import MINOR_DIAGONAL, GraphSample
from cdoa.errors import DataMismatchError, NumericError, ValidationError
from cdoa.gatnet import (attention_weights, backward, forward, init_model, loss, model_forward,
                         parameter_count)
from cdoa.gatnet import layers
from cdoa.gatnet.model import l2_penalty

def _tiny(m=5, seed=0, **kw):
    kw.setdefault("gal_widths", (3, 3, 3, 3))
    kw.setdefault("dense_widths", (4, 4, 4, 2))
    return init_model(m, seed=seed, **kw)


def test_singleton_neighbourhood_alpha_exactly_one(rng):
    x = rng.normal(size=(6, 2, 5))
    w, attn, b = rng.normal(size=(4, 5)), rng.normal(size=8), rng.normal(size=4)
    _, cache = layers.gal_forward(w, attn, b, x, MINOR_DIAGONAL)
    alpha = cache[3]
    assert np.all(alpha[:, 0, 1] == 1.0) and np.all(alpha[:, 1, 0] == 1.0)
    assert np.all(alpha[:, 0, 0] == 0.0) and np.all(alpha[:, 1, 1] == 0.0)


def test_uniform_attention_when_weights_zero(rng):
    x = rng.normal(size=(1, 3, 4))
    _, cache = layers.gal_forward(np.zeros((2, 4)), rng.normal(size=4), np.zeros(2), x, FULL3)
    np.testing.assert_array_equal(cache[3][0], 0.5 * FULL3)


@pytest.mark.parametrize("seed", range(5))
def test_gal_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 2))
    w, attn, b = rng.normal(size=(2, 2)), rng.normal(size=4), rng.normal(size=2)
    adj = FULL3 if seed % 2 else np.array([[0, 1, 1], [1, 0, 0], [1, 1, 1]])
    z, cache = layers.gal_forward(w, attn, b, x[None], adj)
    z_ref, alpha_ref = gat_oracle.gal(w, attn, b, x, adj)
    np.testing.assert_allclose(z[0], z_ref, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(cache[3][0], alpha_ref, rtol=1e-13, atol=1e-15)


def test_gal_shape_errors(rng):
    with pytest.raises(ValidationError):
        layers.gal_forward(np.ones((2, 3)), np.ones(4), np.ones(2), np.ones((1, 2, 4)), MINOR_DIAGONAL)
    with pytest.raises(ValidationError):
        layers.gal_forward(np.ones((2, 3)), np.ones(4), np.ones(2), np.ones((1, 3, 3)), MINOR_DIAGONAL)
    with pytest.raises(ValidationError):
        layers.gal_forward(np.ones((2, 3)), np.ones(4), np.ones(2), np.ones((1, 2, 3)), [[0, 2], [1, 0]])


def test_pool_examples(rng):
    row = rng.normal(size=4)
    z = np.stack([row, row, row])[None]
    out, _ = layers.pool_forward(rng.normal(size=4), z)
    np.testing.assert_allclose(out[0], row, rtol=1e-14)
    z = rng.normal(size=(1, 2, 4))
    out, (_, beta) = layers.pool_forward(np.zeros(4), z)
    np.testing.assert_array_equal(beta, 0.5)
    p = rng.normal(size=4)
    out, _ = layers.pool_forward(p, z)
    np.testing.assert_allclose(out[0], gat_oracle.pool(p, z[0]), rtol=1e-13)


def test_zero_model_zero_output():
    model = _tiny()
    for k in model.params:
        model.params[k][...] = 0.0
    sample = GraphSample(x=np.zeros((2, 5)), label=(0.0, 0.0))
    assert model_forward(model, sample) == (0.0, 0.0)


def test_forward_is_pure(rng):
    model = randomize(_tiny(), rng)
    sample = GraphSample(x=rng.normal(size=(2, 5)), label=(0.0, 0.0))
    assert model_forward(model, sample) == model_forward(model, sample)


@pytest.mark.parametrize("seed", range(4))
def test_model_matches_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    model = randomize(_tiny(seed=seed), rng)
    x = rng.normal(size=(2, 5))
    got = forward(model, x[None])[0]
    ref = gat_oracle.model(model.params, x, MINOR_DIAGONAL)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_dense_only_matches_oracle(rng):
    model = randomize(init_model(5, dense_only=True, dense_widths=(4, 4, 4, 2)), rng)
    assert not any(k.startswith("gal") or k == "pool" for k in model.params)
    x = rng.normal(size=(2, 5))
    ref = gat_oracle.model(model.params, x, MINOR_DIAGONAL, dense_only=True)
    np.testing.assert_allclose(forward(model, x[None])[0], ref, rtol=1e-12)


def test_dimension_mismatch(rng):
    model = _tiny(m=5)
    with pytest.raises(DataMismatchError):
        forward(model, rng.normal(size=(1, 2, 6)))


def test_non_finite_input_rejected():
    model = _tiny()
    x = np.zeros((1, 2, 5))
    x[0, 0, 0] = np.nan
    with pytest.raises(NumericError):
        forward(model, x)


def test_loss_examples(rng):
    model = randomize(_tiny(l2_lambda=0.0), rng)
    x = rng.normal(size=(7, 2, 5))
    pred = forward(model, x)
    assert loss(model, x, pred) == 0.0
    assert loss(model, x, pred - 2.0) == pytest.approx(2.0, abs=1e-12)
    y = rng.normal(scale=10, size=(7, 2))
    ref = sum(abs(gat_oracle.model(model.params, x[b], MINOR_DIAGONAL)[i] - y[b, i])
              for b in range(7) for i in range(2)) / 14
    assert loss(model, x, y) == pytest.approx(ref, rel=1e-12)
    model.l2_lambda = 0.01
    weights = sum(np.sum(v**2) for k, v in model.params.items() if not k.endswith((".bias", ".b")))
    assert loss(model, x, y) == pytest.approx(ref + 0.01 * weights, rel=1e-12)


def test_zero_loss_zero_gradient(rng):
    model = randomize(_tiny(l2_lambda=0.0), rng)
    x = rng.normal(size=(4, 2, 5))
    value, grads = backward(model, x, forward(model, x))
    assert value == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_l2_gradient_exact(rng):
    model = randomize(_tiny(l2_lambda=0.03), rng)
    x = rng.normal(size=(4, 2, 5))
    _, grads = backward(model, x, forward(model, x))
    for name in model.params:
        if name.endswith((".bias", ".b")):
            assert np.all(grads[name] == 0)
        else:
            np.testing.assert_array_equal(grads[name], 2 * 0.03 * model.params[name])


@pytest.mark.parametrize("seed", range(6))
def test_gradients_match_finite_differences(seed):
    assert max_gradcheck_error(*gradcheck_instance(seed)) < 1e-4


def test_dense_only_gradients(rng):
    model = randomize(init_model(3, dense_only=True, dense_widths=(3, 4, 3, 2), l2_lambda=1e-3), rng)
    x = rng.normal(size=(3, 2, 3))
    y = rng.normal(scale=3.0, size=(3, 2))
    assert max_gradcheck_error(model, x, y, MINOR_DIAGONAL) < 1e-4


def test_softmax_rows_sum_to_one(rng):
    model = randomize(_tiny(num_nodes=3), rng)
    alphas = attention_weights(model, rng.normal(size=(5, 3, 5)), FULL3)
    for a in alphas:
        np.testing.assert_allclose(a.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(a[:, np.eye(3, dtype=bool)] == 0)


@given(st.permutations(range(3)), st.integers(0, 2**16))
@settings(max_examples=25, deadline=None)
def test_joint_node_permutation(perm, seed):
    rng = np.random.default_rng(seed)
    perm = np.array(perm)
    adj = (rng.random((3, 3)) < 0.6).astype(float)
    np.fill_diagonal(adj, 0)
    w, attn, b = rng.normal(size=(3, 4)), rng.normal(size=6), rng.normal(size=3)
    x = rng.normal(size=(2, 3, 4))
    z, _ = layers.gal_forward(w, attn, b, x, adj)
    zp, _ = layers.gal_forward(w, attn, b, x[:, perm], adj[np.ix_(perm, perm)])
    np.testing.assert_allclose(zp, z[:, perm], rtol=1e-12, atol=1e-14)
    p = rng.normal(size=3)
    np.testing.assert_allclose(layers.pool_forward(p, zp)[0], layers.pool_forward(p, z)[0],
                               rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("m, dense_only", [(5, False), (100, False), (100, True), (2000, False)])
def test_parameter_count_closed_form(m, dense_only):
    model = init_model(m, dense_only=dense_only)
    assert model.num_parameters == parameter_count(m, dense_only=dense_only)
    if not dense_only:
        gal = 256 * (m + 3) + 128 * (256 + 3) + 64 * (128 + 3) + 32 * (64 + 3)
        dense = 64 * 33 + 32 * 65 + 16 * 33 + 2 * 17
        assert model.num_parameters == gal + 32 + dense


def test_architecture_is_fixed():
    with pytest.raises(ValidationError):
        init_model(5, gal_widths=(3, 3, 3))
    with pytest.raises(ValidationError):
        init_model(5, dense_widths=(4, 4, 4, 3))


def test_init_deterministic_and_glorot():
    a, b = init_model(50, seed=3), init_model(50, seed=3)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])
    limit = np.sqrt(6.0 / (50 + 256))
    assert np.abs(a.params["gal0.w"]).max() <= limit
    assert np.all(a.params["gal0.bias"] == 0)


def test_l2_penalty_excludes_biases(rng):
    model = _tiny(l2_lambda=1.0)
    for k in model.params:
        model.params[k][...] = 0.0
    model.params["dense3.b"][...] = 5.0
    assert l2_penalty(model) == 0.0
    model.params["pool"][0] = 2.0
    assert l2_penalty(model) == 4.0
