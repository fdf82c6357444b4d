import dataclasses

import numpy as np
import pytest

from ecfc.checkpoint import Checkpoint
from ecfc.config import TrainConfig
from ecfc.errors import BoundsError, ContractError
from ecfc.features import Normalizer, SplitSpec
from ecfc.forecast import Horizon, forecast, horizon_sweep
from ecfc.ingest import series_from_values
from ecfc.model import zero_state
from ecfc.synth import SynthParams, synthesize
from ecfc.trainer import fit


class StubModel:
    input_mode = "flat"

    def predict_one(self, x, state=None):
        return 0.5 * x[-1] + 0.25 * x[-2] + 0.1, state


def stub_checkpoint(split):
    z = np.zeros(6)
    norm = Normalizer(("half_hour", "day_of_month", "day_of_week", "week_of_year",
                       "day_of_year", "year"), z, z, 0.0, 1.0)
    config = TrainConfig(window_size=2, input_mode="flat", split=split)
    return Checkpoint(config, norm, StubModel(), None, 1)


def test_stub_forecast_is_hand_unrolled_feedback():
    series = series_from_values([0.3, 0.9, 0.2, 0.8, 0.4, 0.6, 7.0, 8.0, 9.0])
    ckpt = stub_checkpoint(SplitSpec(0, 6, 9))
    result = forecast(ckpt, series, 3)
    p1 = 0.5 * 0.6 + 0.25 * 0.4 + 0.1
    p2 = 0.5 * p1 + 0.25 * 0.6 + 0.1
    p3 = 0.5 * p2 + 0.25 * p1 + 0.1
    assert result.predicted.tolist() == [p1, p2, p3]
    assert result.actual.tolist() == [7.0, 8.0, 9.0]
    assert result.mae == pytest.approx(np.mean(np.abs(np.array([7, 8, 9]) - [p1, p2, p3])))


def test_horizon_past_series_end_has_no_actuals():
    series = series_from_values([0.3, 0.9, 0.2, 0.8, 0.4, 0.6, 7.0])
    result = forecast(stub_checkpoint(SplitSpec(0, 6, 7)), series, 4)
    assert len(result.predicted) == 4
    assert result.n_compared == 1 and np.isnan(result.actual[1:]).all()
    lines = result.to_csv().splitlines()
    assert lines[0] == "timestamp,predicted_kwh,actual_kwh"
    assert lines[-1].endswith(",")


def test_horizon_must_start_after_training():
    series = series_from_values(np.ones(20))
    ckpt = stub_checkpoint(SplitSpec(0, 6, 9))
    with pytest.raises(ContractError):
        forecast(ckpt, series, Horizon(3, 7))
    with pytest.raises(ContractError):
        forecast(ckpt, series, 0)


def test_not_enough_history():
    series = series_from_values(np.ones(4))
    with pytest.raises(BoundsError):
        forecast(stub_checkpoint(SplitSpec(0, 6, 9)), series, 3)


def test_long_horizons_in_half_hours():
    ckpt = stub_checkpoint(SplitSpec(0, 6, 9))
    assert [Horizon.days(ckpt, d).length for d in (10, 20, 30, 40, 50, 100)] == \
        [480, 960, 1440, 1920, 2400, 4800]


@pytest.fixture(scope="module")
def trained():
    series = synthesize(SynthParams(days=4, seed=2))
    config = TrainConfig(window_size=8, units=4, epochs=1, input_mode="flat",
                         split=SplitSpec(0, 144, 192))
    best, _ = fit(series, config)
    return best, series


def test_prefix_consistency(trained):
    ckpt, series = trained
    long = forecast(ckpt, series, 100)
    for h in (1, 17, 48, 99):
        short = forecast(ckpt, series, h)
        assert np.array_equal(short.predicted, long.predicted[:h])
        assert short.mae == long.prefix(h).mae


def test_sweep_equals_individual_forecasts(trained):
    ckpt, series = trained
    for r in horizon_sweep(ckpt, series, [10, 48, 30]):
        single = forecast(ckpt, series, r.horizon)
        assert np.array_equal(r.predicted, single.predicted)
        assert (r.mae, r.mape) == (single.mae, single.mape)


def test_forecast_is_pure(trained):
    ckpt, series = trained
    before_values = series.values.copy()
    before_state = [h.copy() for h in ckpt.state.h]
    a = forecast(ckpt, series, 30)
    b = forecast(ckpt, series, 30)
    assert np.array_equal(a.predicted, b.predicted)
    assert np.array_equal(series.values, before_values)
    assert all(np.array_equal(x, y) for x, y in zip(ckpt.state.h, before_state))


def test_flat_forecast_uses_stored_state(trained):
    ckpt, series = trained
    cold = dataclasses.replace(ckpt, state=zero_state(ckpt.model))
    assert not np.array_equal(forecast(ckpt, series, 5).predicted,
                              forecast(cold, series, 5).predicted)


def test_sequence_forecast_extends_beyond_series():
    series = synthesize(SynthParams(days=3, seed=0))
    config = TrainConfig(window_size=6, units=3, epochs=1, split=SplitSpec(0, 120, 144))
    best, _ = fit(series, config)
    result = forecast(best, series, 60)
    assert len(result.predicted) == 60 and result.n_compared == 24
    assert result.timestamps[-1] == series.timestamp(120 + 59)
    assert np.isfinite(result.predicted).all()
