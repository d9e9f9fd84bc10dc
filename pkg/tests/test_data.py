from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cel.data import (
    DataError,
    NormalizationParams,
    TimeSeries,
    denormalize,
    fit_normalizer,
    load_csv,
    make_windows,
    normalize,
    segment_contexts,
    split_count,
)
from cel.synthetic import influenza_like, measles_like, mpox_like, write_csv


def series_of(values, frequency="weekly"):
    return TimeSeries(tuple(f"t{k}" for k in range(len(values))), np.asarray(values, float), frequency)


# -- loading ----------------------------------------------------------------


def test_load_two_rows(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("date,value\nd1,1.0\nd2,2.0\n")
    s = load_csv(path)
    assert len(s) == 2 and s.timestamps == ("d1", "d2") and list(s.values) == [1.0, 2.0]


def test_load_keeps_file_order(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("date,value\n2020-03,3\n2020-01,1\n2020-02,2\n")
    assert list(load_csv(path).values) == [3.0, 1.0, 2.0]


def test_non_numeric_row_is_named(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("date,value\nd1,1.0\nd2,2.0\nd3,abc\n")
    with pytest.raises(DataError, match="row 3"):
        load_csv(path)


@pytest.mark.parametrize(
    "body, match",
    [
        ("date,value\nd1,1.0\n", "at least 2"),
        ("when,count\nd1,1\nd2,2\n", "header"),
        ("date,value\nd1,1.0,extra\nd2,2\n", "row 1"),
        ("date,value\nd1,1.0\nd2,nan\n", "row 2"),
    ],
)
def test_load_errors(tmp_path, body, match):
    path = tmp_path / "s.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=match):
        load_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "absent.csv")


def test_mpox_sized_export_loads_450_days(tmp_path):
    write_csv(mpox_like(0), tmp_path / "mpox.csv")
    s = load_csv(tmp_path / "mpox.csv", "daily")
    assert len(s) == 450
    assert (s.timestamps[0], s.timestamps[-1]) == ("2022-05-08", "2023-07-31")


# -- normalization ----------------------------------------------------------


def test_fit_normalizer_examples():
    assert fit_normalizer(series_of([0, 5, 10])) == NormalizationParams(0.0, 10.0)
    with pytest.raises(DataError):
        fit_normalizer(series_of([3, 3, 3]))


def test_normalize_endpoints_and_midpoint():
    p = NormalizationParams(-2.0, 6.0)
    assert normalize(-2.0, p) == 0.0 and normalize(6.0, p) == 1.0 and normalize(2.0, p) == 0.5


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50).filter(lambda v: max(v) > min(v)))
def test_normalized_values_in_unit_interval(values):
    p = fit_normalizer(series_of(values))
    scaled = normalize(np.array(values), p)
    assert scaled.min() >= 0.0 and scaled.max() <= 1.0


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.01, 1e3))
def test_denormalize_inverts_normalize(x, lo, width):
    p = NormalizationParams(lo, lo + width)
    assert denormalize(normalize(x, p), p) == pytest.approx(x, abs=1e-12 * max(1.0, abs(x), abs(lo) + width))


# -- windows ----------------------------------------------------------------


def test_window_example():
    v = np.arange(1.0, 15.0)  # v1..v14
    ds = make_windows(v, window=12, seq_len=1)
    assert len(ds) == 2
    assert np.array_equal(ds.inputs[0, 0], v[:12]) and ds.targets[0] == 13.0
    assert np.array_equal(ds.inputs[1, 0], v[1:13]) and ds.targets[1] == 14.0


def test_window_with_sequence_length():
    v = np.arange(10.0)
    ds = make_windows(v, window=3, seq_len=2)
    assert ds.inputs.shape == (6, 2, 3)
    assert np.array_equal(ds.inputs[0], [[0, 1, 2], [1, 2, 3]]) and ds.targets[0] == 4.0


@given(st.integers(1, 15), st.integers(1, 4), st.integers(0, 40))
def test_window_count(window, seq_len, extra):
    n = window + seq_len + extra
    ds = make_windows(np.arange(float(n)), window, seq_len)
    assert len(ds) == n - window - seq_len + 1
    # each step holds consecutive values and the target follows the last step
    assert np.all(np.diff(ds.inputs, axis=2) == 1.0)
    assert np.all(ds.targets == ds.inputs[:, -1, -1] + 1)


def test_window_too_short():
    with pytest.raises(DataError):
        make_windows(np.arange(12.0), window=12)


# -- segmentation -----------------------------------------------------------


@pytest.mark.parametrize(
    "series, n, span",
    [(mpox_like(0), 10, 45), (influenza_like(0), 10, 84), (measles_like(0), 6, 39)],
    ids=["mpox", "influenza", "measles"],
)
def test_context_spans_match_dataset_tables(series, n, span):
    contexts = segment_contexts(series, n)
    assert len(contexts) == n
    assert all(len(c.raw_span) == span for c in contexts)


@given(st.integers(30, 400), st.integers(1, 8), st.integers(1, 6))
def test_segments_partition_a_prefix(length, n, window):
    values = np.sin(np.arange(length) * 0.37) + np.arange(length) * 0.01
    try:
        contexts = segment_contexts(series_of(values), n, Fraction(4, 5), window)
    except DataError:
        return
    starts = [c.raw_span.start for c in contexts]
    assert starts[0] == 0
    for a, b in zip(contexts, contexts[1:]):
        assert a.raw_span.stop == b.raw_span.start
    assert contexts[-1].raw_span.stop <= length
    for c in contexts:
        idx = np.concatenate([c.train.target_index, c.test.target_index])
        assert idx.min() >= c.raw_span.start + window and idx.max() < c.raw_span.stop
        # temporal split: every train target precedes every test target
        assert c.train.target_index.max() < c.test.target_index.min()
        assert c.id == contexts.index(c)


def test_split_is_80_20_on_samples():
    contexts = segment_contexts(influenza_like(0), 10)
    assert [(len(c.train), len(c.test)) for c in contexts] == [(57, 15)] * 10
    assert split_count(35, 0.8) == 28 and split_count(100, "0.29") == 29


def test_inputs_and_targets_are_normalized_globally():
    s = influenza_like(1)
    contexts = segment_contexts(s, 10)
    p = fit_normalizer(s)
    for c in contexts:
        for part in (c.train, c.test):
            assert part.inputs.min() >= 0 and part.inputs.max() <= 1
            raw = np.asarray(s.values)[part.target_index]
            assert np.allclose(part.targets, normalize(raw, p), rtol=0, atol=1e-15)


def test_context_stats_use_raw_values():
    s = measles_like(0)
    c = segment_contexts(s, 6)[2]
    raw = np.asarray(s.values)[c.raw_span.start : c.raw_span.stop]
    assert c.stats == (pytest.approx(raw.mean()), pytest.approx(raw.std(ddof=1)))


def test_segmentation_is_deterministic():
    s = mpox_like(3)
    a, b = segment_contexts(s, 10), segment_contexts(s, 10)
    for x, y in zip(a, b):
        assert np.array_equal(x.train.inputs, y.train.inputs) and np.array_equal(x.test.targets, y.test.targets)


def test_too_few_points():
    with pytest.raises(DataError, match="too few"):
        segment_contexts(series_of(np.arange(40.0)), 5, window=12)
