import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdoa.aperture import TransferFunction
from cdoa.errors import NumericError, ValidationError
from cdoa.forward import (SourceAngle, add_noise, empirical_snr, measure, measure_batch,
                          project_many, project_source, superpose)

K0 = 2 * math.pi * 28e9 / 299_792_458.0
angles = st.builds(SourceAngle, st.floats(-90, 90), st.floats(-90, 90))


def _identity_tf(n=64, seed=0):
    rng = np.random.default_rng(seed)
    coords = np.column_stack([np.full(n, 0.03), rng.uniform(-0.1, 0.1, n), rng.uniform(-0.1, 0.1, n)])
    return TransferFunction(np.eye(n, dtype=complex), coords, 0, K0)


def test_broadside_is_all_ones(small_tf):
    for phi in (-30.0, 0.0, 17.0):
        p = project_source(SourceAngle(0.0, phi), small_tf.plane_coords, small_tf.k0)
        np.testing.assert_array_equal(p, np.ones_like(p))


def test_half_wavelength_phase():
    lam = 2 * math.pi / K0
    p = project_source(SourceAngle(30.0, 0.0), np.array([[0.03, lam / 2, 0.0]]), K0)
    # -k0 (lambda/2) sin 30 = -pi/2
    assert p[0] == pytest.approx(np.exp(-1j * math.pi / 2), abs=1e-12)


@given(angles)
@settings(max_examples=40, deadline=None)
def test_projection_unit_modulus_and_odd_phase(angle):
    rng = np.random.default_rng(1)
    yz = rng.uniform(-0.1, 0.1, size=(10, 2))
    pos = np.column_stack([np.full(10, 0.03), yz])
    neg = np.column_stack([np.full(10, 0.07), -yz])
    p = project_source(angle, pos, K0)
    q = project_source(angle, neg, K0)
    np.testing.assert_allclose(np.abs(p), 1.0, atol=1e-14)
    np.testing.assert_allclose(p, np.conj(q), atol=1e-12)


def test_project_many_matches_single(small_tf):
    th = np.array([-20.0, 0.0, 13.0])
    ph = np.array([5.0, -30.0, 29.0])
    many = project_many(th, ph, small_tf.plane_coords, small_tf.k0)
    for i in range(3):
        np.testing.assert_allclose(many[i], project_source(SourceAngle(th[i], ph[i]),
                                                           small_tf.plane_coords, small_tf.k0), atol=1e-15)


def test_source_angle_range():
    with pytest.raises(ValidationError):
        SourceAngle(91.0, 0.0)
    with pytest.raises(ValidationError):
        SourceAngle(0.0, float("nan"))


def test_noiseless_is_exact(small_tf):
    a = SourceAngle(12.0, -7.0)
    m = measure(small_tf, a, None, seed=1)
    np.testing.assert_array_equal(m.s, small_tf.e_matrix @ project_source(a, small_tf.plane_coords, small_tf.k0))


def test_measure_deterministic(small_tf):
    a = SourceAngle(3.0, 4.0)
    np.testing.assert_array_equal(measure(small_tf, a, 10.0, 9).s, measure(small_tf, a, 10.0, 9).s)
    assert np.any(measure(small_tf, a, 10.0, 9).s != measure(small_tf, a, 10.0, 10).s)


def test_identity_injection_50db():
    tf = _identity_tf()
    m = measure(tf, SourceAngle(0.0, 0.0), 50.0, seed=4)
    # s = 1 + n with per-entry noise std 10^-2.5 ~ 0.003
    assert np.mean(np.abs(m.s - 1.0)) < 0.01


def test_snr_50db_over_1000_seeds(small_tf):
    a = SourceAngle(10.0, 20.0)
    clean = measure(small_tf, a, None, 0).s
    noise_power = np.mean([np.mean(np.abs(measure(small_tf, a, 50.0, s).s - clean) ** 2)
                           for s in range(1000)])
    snr = 10 * math.log10(np.vdot(clean, clean).real / (clean.size * noise_power))
    assert abs(snr - 50.0) < 0.5


def test_degenerate_tf_rejects_finite_snr(small_tf):
    zero = TransferFunction(np.zeros_like(small_tf.e_matrix), small_tf.plane_coords, 0, small_tf.k0)
    with pytest.raises(NumericError):
        measure(zero, SourceAngle(0.0, 0.0), 10.0, 1)
    assert np.all(measure(zero, SourceAngle(0.0, 0.0), None, 1).s == 0)


def test_empirical_snr_examples():
    clean = np.zeros(5, dtype=complex)
    clean[2] = 1.0
    noisy = clean.copy()
    noisy[2] += 0.1
    assert empirical_snr(clean, noisy) == pytest.approx(20.0, abs=1e-12)
    assert empirical_snr(clean, clean) == math.inf
    with pytest.raises(NumericError):
        empirical_snr(np.zeros(3), np.ones(3))
    with pytest.raises(ValidationError):
        empirical_snr(np.ones(3), np.ones(4))


def test_empirical_snr_10db_average():
    rng = np.random.default_rng(5)
    clean = rng.normal(size=40) + 1j * rng.normal(size=40)
    vals = [empirical_snr(clean, add_noise(clean, 10.0, np.random.default_rng(i))) for i in range(1000)]
    assert abs(np.mean(vals) - 10.0) < 0.5


def test_superposition(small_tf):
    a, b = SourceAngle(10.0, 3.0), SourceAngle(-25.0, 14.0)
    both = superpose(small_tf, [a, b])
    sa = measure(small_tf, a, None, 0).s
    sb = measure(small_tf, b, None, 0).s
    np.testing.assert_allclose(both, sa + sb, rtol=1e-12, atol=1e-12 * np.abs(both).max())


def test_measure_batch_matches_measure(small_tf):
    th = np.array([1.0, -9.0, 30.0])
    ph = np.array([0.0, 22.0, -30.0])
    seeds = np.array([5, 6, 7], dtype=np.uint64)
    batch = measure_batch(small_tf, th, ph, 20.0, seeds)
    for i in range(3):
        single = measure(small_tf, SourceAngle(th[i], ph[i]), 20.0, int(seeds[i])).s
        np.testing.assert_allclose(batch[i], single, rtol=1e-12, atol=1e-12 * np.abs(single).max())
