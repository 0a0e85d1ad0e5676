import numpy as np
import pytest

from cdoa.dataset import AngleGrid
from cdoa.errors import DataMismatchError, ValidationError
from cdoa.gatnet.model import init_model
from cdoa.harness import (CSV_FIELDS, ConstantEstimator, GatEstimator, MatchedFilter,
                          OracleEstimator, RandomGuessEstimator, SweepSpec, cell_labels,
                          expected_constant_mae, expected_random_mae, make_cell, parse_range,
                          read_rows, run_sweep, score, write_rows)
from cdoa.plotting import plot_csv


def discrete_constant_mae(grid_values):
    v = np.asarray(grid_values)
    return np.abs(v).mean()


def discrete_random_mae(grid_values, lo, hi):
    # E|U - v| for U uniform on [lo, hi], averaged over the label grid
    v = np.asarray(grid_values)
    return (((v - lo) ** 2 + (hi - v) ** 2) / (2 * (hi - lo))).mean()


@pytest.fixture
def spec():
    return SweepSpec(mask_counts=(12,), snr_points_db=(0.0, 30.0), samples_per_point=20000, seed=3)


def test_closed_forms():
    assert expected_constant_mae() == 15.0
    assert expected_random_mae() == 20.0
    vals = np.arange(-30, 31)
    assert discrete_constant_mae(vals) == pytest.approx(930 / 61)


def test_baselines_match_enumeration(small_tf, spec):
    rows = run_sweep([(small_tf, [OracleEstimator(), ConstantEstimator(),
                                  RandomGuessEstimator(spec.grid, seed=1)])], spec)
    vals = spec.grid.thetas
    by = {(r["estimator"], r["snr_db"]): r for r in rows}
    for snr in spec.snr_points_db:
        assert by["oracle", snr]["mae_joint"] == 0.0
        c = by["constant", snr]
        assert c["mae_joint"] == pytest.approx(discrete_constant_mae(vals), abs=0.25)
        r = by["random_guess", snr]
        assert r["mae_joint"] == pytest.approx(discrete_random_mae(vals, -30, 30), abs=0.25)
        assert r["mae_joint"] == pytest.approx(20.0, abs=0.4)


def test_labels_shared_and_seeded(spec):
    a, b = cell_labels(spec, 0), cell_labels(spec, 0)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, cell_labels(spec, 1))
    assert spec.grid.contains(a).all()


def test_row_order_independent_of_threads(small_tf):
    spec = SweepSpec(mask_counts=(12,), snr_points_db=(-10.0, 0.0, 10.0), samples_per_point=50,
                     grid=AngleGrid.uniform(-30, 30, 10))
    ests = [MatchedFilter(small_tf, spec.grid), ConstantEstimator()]
    assert run_sweep([(small_tf, ests)], spec) == run_sweep([(small_tf, ests)], spec, threads=3)


def test_mismatched_model_rejected(small_tf):
    model = init_model(num_features=small_tf.num_masks + 1, seed=0, gal_widths=(4, 4, 4, 4),
                       dense_widths=(4, 4, 4, 2))
    spec = SweepSpec(mask_counts=(12,), samples_per_point=5)
    with pytest.raises(DataMismatchError):
        run_sweep([(small_tf, [GatEstimator(model)])], spec)


@pytest.mark.parametrize("kwargs", [dict(snr_points_db=()), dict(mask_counts=()),
                                    dict(samples_per_point=0)])
def test_empty_inputs_rejected(kwargs):
    base = dict(mask_counts=(10,))
    with pytest.raises(ValidationError):
        SweepSpec(**{**base, **kwargs})


def test_score():
    assert score([[1.0, -2.0]], [[0.0, 0.0]]) == (1.0, 2.0, 1.5)


def test_parse_range():
    assert parse_range("-20:30:5") == tuple(float(x) for x in range(-20, 31, 5))
    assert parse_range("0, 10,30") == (0.0, 10.0, 30.0)
    assert parse_range("") == ()
    with pytest.raises(ValidationError):
        parse_range("0:10:0")


def test_cell_noise_matches_requested_snr(small_tf):
    spec = SweepSpec(mask_counts=(12,), snr_points_db=(10.0,), samples_per_point=400)
    cell = make_cell(small_tf, spec, 0)
    clean = make_cell(small_tf, SweepSpec(mask_counts=(12,), snr_points_db=(200.0,),
                                          samples_per_point=400), 0)
    noise = cell.s - clean.s
    ratio = np.mean(np.abs(clean.s) ** 2) / np.mean(np.abs(noise) ** 2)
    assert 10 * np.log10(ratio) == pytest.approx(10.0, abs=0.3)


def test_csv_and_plot_regeneration(tmp_path, small_tf):
    spec = SweepSpec(mask_counts=(12,), snr_points_db=(0.0, 20.0), samples_per_point=30,
                     grid=AngleGrid.uniform(-30, 30, 10))
    rows = run_sweep([(small_tf, [MatchedFilter(small_tf, spec.grid), ConstantEstimator()])], spec)
    write_rows(rows, tmp_path / "a.csv")
    write_rows(run_sweep([(small_tf, [MatchedFilter(small_tf, spec.grid), ConstantEstimator()])], spec),
               tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0].split(",")
    assert header == CSV_FIELDS
    back = read_rows(tmp_path / "a.csv")
    assert back == rows
    assert all(r["tf_hash"] == small_tf.digest() for r in back)
    plot_csv(tmp_path / "a.csv", tmp_path / "a.svg")
    plot_csv(tmp_path / "a.csv", tmp_path / "b.svg")
    svg = (tmp_path / "a.svg").read_bytes()
    assert svg.startswith(b"<?xml") and svg == (tmp_path / "b.svg").read_bytes()
