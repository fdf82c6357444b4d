from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecfc.errors import BoundsError, ContractError
from ecfc.features import (
    FeatureSchema,
    Normalizer,
    SplitSpec,
    build_examples,
    calendar_matrix,
    calendar_of,
    fit_normalizer,
    split_dataset,
    target_ranges,
)
from ecfc.ingest import series_from_values


# Independent civil-calendar oracle built on epoch-day arithmetic only.
def _epoch_day(y, m, d):
    return int((np.datetime64(f"{y:04d}-{m:02d}-{d:02d}") - np.datetime64("1970-01-01")).astype(int))


def oracle(ts):
    y, m, d = ts.year, ts.month, ts.day
    days = _epoch_day(y, m, d)
    dow = (days + 3) % 7  # 1970-01-01 was a Thursday; Monday = 0
    doy = days - _epoch_day(y, 1, 1) + 1
    # ISO week: the week containing this date's Thursday, counted in that Thursday's year
    thursday = days - dow + 3
    t_year = int(str(np.datetime64("1970-01-01") + np.timedelta64(thursday, "D"))[:4])
    week = (thursday - _epoch_day(t_year, 1, 1)) // 7 + 1
    return dict(year=y, month=m, day_of_month=d, half_hour=2 * ts.hour + ts.minute // 30,
                day_of_week=dow, week_of_year=week, day_of_year=doy)


def test_calendar_new_year_2019():
    c = calendar_of(datetime(2019, 1, 1))
    assert (c.year, c.month, c.day_of_month, c.half_hour) == (2019, 1, 1, 0)
    assert (c.day_of_week, c.day_of_year, c.week_of_year) == (1, 1, 1)
    assert vars(c) == oracle(datetime(2019, 1, 1))


def test_calendar_leap_year_end():
    ts = datetime(2016, 12, 31, 23, 30)
    c = calendar_of(ts)
    assert (c.half_hour, c.day_of_year, c.day_of_week, c.week_of_year) == (47, 366, 5, 52)
    assert vars(c) == oracle(ts)


def test_calendar_off_grid_rejected():
    with pytest.raises(ContractError):
        calendar_of(datetime(2019, 1, 1, 0, 15))


@settings(max_examples=1000, deadline=None)
@given(st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 12, 31, 23, 59)))
def test_calendar_agrees_with_oracle(ts):
    ts = ts.replace(minute=30 if ts.minute >= 30 else 0, second=0, microsecond=0)
    assert vars(calendar_of(ts)) == oracle(ts)


def test_calendar_matrix_matches_calendar_of():
    start = datetime(2015, 12, 30, 22, 30)
    names = ("half_hour", "day_of_month", "day_of_week", "week_of_year", "day_of_year", "year", "month")
    mat = calendar_matrix(start, 200, names)
    for k in range(200):
        c = vars(calendar_of(start + timedelta(minutes=30 * k)))
        assert mat[k].tolist() == [c[n] for n in names]


def identity_normalizer(names):
    z = np.zeros(len(names))
    return Normalizer(tuple(names), z, z, 0.0, 1.0)


def test_window_pairs_with_identity_normalizer():
    series = series_from_values([1, 2, 3, 4, 5])
    schema = FeatureSchema.windowed(2, "flat")
    norm = identity_normalizer(schema.calendar_names)
    ex = build_examples(series, schema, norm, range(2, 5))
    assert [(e.input[6:].tolist(), e.target) for e in ex] == [([1, 2], 3), ([2, 3], 4), ([3, 4], 5)]


def test_sequence_mode_layout():
    series = series_from_values([1, 2, 3, 4, 5])
    schema = FeatureSchema.windowed(2, "sequence")
    ex = build_examples(series, schema, identity_normalizer(schema.calendar_names), range(2, 5))
    assert ex[0].input.shape == (2, 7)
    assert ex[0].input[:, 0].tolist() == [1, 2]
    assert ex[2].input[:, 0].tolist() == [3, 4]


def test_schema_arity():
    assert FeatureSchema("calendar4", 0, "flat").input_dim == 4
    assert FeatureSchema("calendar7", 0, "flat").input_dim == 7
    assert FeatureSchema.windowed(480, "flat").input_dim == 486
    assert FeatureSchema.windowed(480).input_shape == (480, 7)


def test_calendar4_examples_have_four_inputs():
    series = series_from_values(np.arange(100.0))
    schema = FeatureSchema("calendar4", 0, "flat")
    split = SplitSpec(0, 60, 100)
    train, val = split_dataset(series, schema, split)
    assert {e.input.shape for e in train + val} == {(4,)}


def test_bounds_error_for_missing_history():
    series = series_from_values(np.arange(10.0))
    schema = FeatureSchema.windowed(3, "flat")
    with pytest.raises(BoundsError):
        build_examples(series, schema, identity_normalizer(schema.calendar_names), range(2, 5))


def test_normalizer_min_max():
    series = series_from_values([100.0, 300.0, 900.0])
    schema = FeatureSchema("calendar4", 0, "flat")
    norm = fit_normalizer(series, schema, SplitSpec(0, 2, 3))
    assert (norm.target_min, norm.target_max) == (100.0, 300.0)
    assert norm.normalize_target(200.0) == 0.5


def test_constant_channel_maps_to_zero():
    series = series_from_values([50.0] * 10)
    norm = fit_normalizer(series, FeatureSchema("calendar4", 0, "flat"), SplitSpec(0, 10, 10))
    assert norm.normalize_target(50.0) == 0.0
    # year is constant over one day
    assert norm.normalize_features(calendar_matrix(series.start, 1, norm.feature_names))[0, 0] == 0.0


def test_year_maximum_maps_to_one():
    start = datetime(2007, 1, 1)
    n = 48 * ((datetime(2014, 12, 31) - start).days + 1)
    series = series_from_values(np.ones(n), start)
    norm = fit_normalizer(series, FeatureSchema("calendar4", 0, "flat"), SplitSpec(0, n, n))
    feats = norm.normalize_features(calendar_matrix(datetime(2014, 6, 1), 1, norm.feature_names))
    assert feats[0, 0] == 1.0


def test_denormalize_inverts_normalize():
    norm = Normalizer(("a",), np.zeros(1), np.ones(1), 12.5, 731.0)
    x = np.random.default_rng(0).uniform(0, 1000, 500)
    np.testing.assert_allclose(norm.denormalize_target(norm.normalize_target(x)), x, rtol=1e-13)


def test_no_leakage_from_validation_points():
    values = np.random.default_rng(3).uniform(0, 100, 2000)
    split = SplitSpec(100, 1200, 2000)
    schema = FeatureSchema.windowed(48)
    full = fit_normalizer(series_from_values(values), schema, split)
    cut = fit_normalizer(series_from_values(values[: split.train_end]), schema, split)
    assert full.to_dict() == cut.to_dict()


def test_full_dataset_split_geometry():
    split = SplitSpec(15000, 100000, 131520)
    train, val = target_ranges(split, 3840)
    assert (val.start, val.stop - 1, len(val)) == (115000, 131519, 16520)
    assert train.start == 18840


def test_minimal_and_empty_split():
    series = series_from_values(np.arange(20.0))
    schema = FeatureSchema.windowed(4, "flat")
    train, val = split_dataset(series, schema, SplitSpec(0, 5, 5))
    assert len(train) == 1 and val == []


def test_inverted_split_rejected():
    series = series_from_values(np.arange(20.0))
    with pytest.raises(ContractError):
        split_dataset(series, FeatureSchema.windowed(4, "flat"), SplitSpec(0, 10, 8))


def test_first_validation_window_overlaps_training():
    series = series_from_values(np.arange(50.0))
    schema = FeatureSchema.windowed(5, "flat")
    train, val = split_dataset(series, schema, SplitSpec(0, 30, 50))
    norm = fit_normalizer(series, schema, SplitSpec(0, 30, 50))
    window = norm.denormalize_target(val[0].input[6:])
    np.testing.assert_allclose(window, np.arange(25.0, 30.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 12))
def test_window_shift_property(length, n):
    if length <= n + 1:
        length = n + 2
    series = series_from_values(np.random.default_rng(length * 31 + n).uniform(0, 10, length))
    schema = FeatureSchema.windowed(n, "flat")
    norm = fit_normalizer(series, schema, SplitSpec(0, length, length))
    ex = build_examples(series, schema, norm, range(n, length))
    for a, b in zip(ex, ex[1:]):
        assert b.input[6:].tolist() == a.input[7:].tolist() + [a.target]
