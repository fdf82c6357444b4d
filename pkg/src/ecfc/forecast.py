"""Autoregressive horizon forecasts from a checkpoint."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import metrics
from .checkpoint import Checkpoint
from .errors import BoundsError, ContractError, UndefinedMetricError
from .features import FeatureFrame
from .ingest import SLOTS_PER_DAY, MeasurementSeries
from .trainer import rollout


@dataclass(frozen=True)
class Horizon:
    length: int
    start_index: int

    @classmethod
    def after_training(cls, checkpoint: Checkpoint, length: int) -> "Horizon":
        return cls(length, checkpoint.config.split.train_end)

    @classmethod
    def days(cls, checkpoint: Checkpoint, days: float) -> "Horizon":
        return cls.after_training(checkpoint, int(round(days * SLOTS_PER_DAY)))


@dataclass
class ForecastResult:
    horizon: int
    timestamps: list
    predicted: np.ndarray
    actual: np.ndarray  # NaN past the end of the series
    mae: float | None
    mape: float | None
    n_compared: int
    n_excluded: int

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["timestamp", "predicted_kwh", "actual_kwh"])
        for ts, p, a in zip(self.timestamps, self.predicted.tolist(), self.actual.tolist()):
            writer.writerow([ts.isoformat(), repr(p), "" if np.isnan(a) else repr(a)])
        return out.getvalue()

    def metrics_dict(self) -> dict:
        return {
            "horizon_half_hours": self.horizon,
            "mae_kwh": self.mae,
            "mape_pct": self.mape,
            "excluded_zero_targets": self.n_excluded,
        }

    def prefix(self, length: int, zero_floor: float = metrics.DEFAULT_ZERO_FLOOR) -> "ForecastResult":
        """The result a forecast of ``length`` steps would have produced."""
        if not 1 <= length <= self.horizon:
            raise ContractError(f"prefix length {length} outside 1..{self.horizon}")
        return _result(self.timestamps[:length], self.predicted[:length],
                       self.actual[:length], zero_floor)


def _result(timestamps, predicted, actual, zero_floor) -> ForecastResult:
    have = ~np.isnan(actual)
    mae = mape = None
    excluded = 0
    if have.any():
        a, p = actual[have], predicted[have]
        mae = metrics.mae(a, p)
        try:
            mape, excluded = metrics.mape(a, p, zero_floor)
        except UndefinedMetricError:
            excluded = int(have.sum())
    return ForecastResult(len(predicted), list(timestamps), predicted, actual,
                          mae, mape, int(have.sum()) - excluded, excluded)


def _resolve(checkpoint: Checkpoint, horizon) -> Horizon:
    if checkpoint.config.split is None:
        raise ContractError("checkpoint has no recorded split")
    expected = checkpoint.config.split.train_end
    if isinstance(horizon, Horizon):
        if horizon.start_index != expected:
            raise ContractError(
                f"horizon must start right after training (index {expected}), "
                f"got {horizon.start_index}"
            )
    else:
        horizon = Horizon(int(horizon), expected)
    if horizon.length < 1:
        raise ContractError("horizon length must be >= 1")
    return horizon


def forecast(checkpoint: Checkpoint, series: MeasurementSeries, horizon) -> ForecastResult:
    """Predict ``horizon`` half hours after the training range, feeding back predictions.

    ``horizon`` is a :class:`Horizon` or a length in half hours.  Metrics
    cover only the part of the horizon that the series has actuals for.
    """
    horizon = _resolve(checkpoint, horizon)
    start, length = horizon.start_index, horizon.length
    n = checkpoint.config.schema.history
    if start - n < 0 or start > len(series):
        raise BoundsError(
            f"forecast from index {start} needs measured history [{start - n}, {start}), "
            f"series has {len(series)} points"
        )
    frame = FeatureFrame(series, checkpoint.config.schema, checkpoint.normalizer,
                         length=max(len(series), start + length))
    state = checkpoint.state if checkpoint.model.input_mode == "flat" else None
    norm = rollout(checkpoint.model, frame, start, length, state)
    predicted = checkpoint.normalizer.denormalize_target(norm)
    actual = np.full(length, np.nan)
    overlap = max(0, min(length, len(series) - start))
    actual[:overlap] = series.values[start : start + overlap]
    timestamps = [series.timestamp(k) for k in range(start, start + length)]
    return _result(timestamps, predicted, actual, checkpoint.config.zero_floor)


def horizon_sweep(checkpoint: Checkpoint, series: MeasurementSeries, horizons) -> list:
    """One result per horizon, all cut from a single longest trajectory."""
    horizons = [int(h) for h in horizons]
    if not horizons:
        raise ContractError("horizon list is empty")
    full = forecast(checkpoint, series, max(horizons))
    return [full.prefix(h, checkpoint.config.zero_floor) for h in horizons]
