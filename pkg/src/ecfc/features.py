"""Calendar features, min-max normalization and sliding-window examples."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import BoundsError, ContractError
from .ingest import SLOTS_PER_DAY, MeasurementSeries

CALENDAR4 = ("year", "month", "day_of_month", "half_hour")
CALENDAR7 = CALENDAR4 + ("day_of_week", "day_of_year", "week_of_year")
# order of the windowed input vector: h_n, d_m, d_w, w, d_y, y
WINDOWED = ("half_hour", "day_of_month", "day_of_week", "week_of_year", "day_of_year", "year")

VARIANTS = ("calendar4", "calendar7", "windowed")
INPUT_MODES = ("sequence", "flat")


@dataclass(frozen=True)
class CalendarFeatures:
    year: int
    month: int
    day_of_month: int
    half_hour: int
    day_of_week: int  # Monday = 0
    week_of_year: int  # ISO-8601
    day_of_year: int


def calendar_of(timestamp: datetime) -> CalendarFeatures:
    if timestamp.minute not in (0, 30) or timestamp.second or timestamp.microsecond:
        raise ContractError(f"{timestamp} is not on the half-hour grid")
    d = timestamp.date()
    return CalendarFeatures(
        year=d.year,
        month=d.month,
        day_of_month=d.day,
        half_hour=2 * timestamp.hour + (1 if timestamp.minute >= 30 else 0),
        day_of_week=d.weekday(),
        week_of_year=d.isocalendar()[1],
        day_of_year=d.timetuple().tm_yday,
    )


def calendar_matrix(start: datetime, count: int, names=WINDOWED) -> np.ndarray:
    """Raw calendar features for ``count`` consecutive half hours from ``start``.

    Date fields are computed once per day and broadcast over the slots.
    """
    if start.minute not in (0, 30) or start.second or start.microsecond:
        raise ContractError(f"{start} is not on the half-hour grid")
    offset = 2 * start.hour + (start.minute // 30)
    n_days = (offset + count + SLOTS_PER_DAY - 1) // SLOTS_PER_DAY
    first = start.date()
    per_day = {name: np.empty(n_days) for name in names}
    for k in range(n_days):
        d = first + timedelta(days=k)
        fields = {
            "year": d.year,
            "month": d.month,
            "day_of_month": d.day,
            "day_of_week": d.weekday(),
            "week_of_year": d.isocalendar()[1],
            "day_of_year": d.timetuple().tm_yday,
        }
        for name in names:
            if name != "half_hour":
                per_day[name][k] = fields[name]
    positions = offset + np.arange(count)
    day_index = positions // SLOTS_PER_DAY
    out = np.empty((count, len(names)))
    for j, name in enumerate(names):
        if name == "half_hour":
            out[:, j] = positions % SLOTS_PER_DAY
        else:
            out[:, j] = per_day[name][day_index]
    return out


@dataclass(frozen=True)
class FeatureSchema:
    variant: str = "windowed"
    window: int = 0
    input_mode: str = "sequence"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown schema variant {self.variant!r}")
        if self.input_mode not in INPUT_MODES:
            raise ContractError(f"unknown input mode {self.input_mode!r}")
        if self.variant == "windowed":
            if self.window < 1:
                raise ContractError("windowed schema needs window >= 1")
        else:
            if self.window != 0:
                raise ContractError(f"{self.variant} schema takes no window")
            if self.input_mode != "flat":
                raise ContractError("calendar-only schemas support flat input only")

    @classmethod
    def windowed(cls, n: int, input_mode: str = "sequence") -> "FeatureSchema":
        return cls("windowed", n, input_mode)

    @property
    def calendar_names(self) -> tuple:
        return {"calendar4": CALENDAR4, "calendar7": CALENDAR7, "windowed": WINDOWED}[self.variant]

    @property
    def history(self) -> int:
        """Number of past measurements each example consumes."""
        return self.window

    @property
    def input_dim(self) -> int:
        """Width of one model timestep."""
        if self.input_mode == "sequence":
            return 1 + len(self.calendar_names)
        return len(self.calendar_names) + self.window

    @property
    def input_shape(self) -> tuple:
        if self.input_mode == "sequence":
            return (self.window, self.input_dim)
        return (self.input_dim,)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "window": self.window, "input_mode": self.input_mode}


@dataclass(frozen=True)
class SplitSpec:
    train_start: int
    train_len: int
    val_end: int

    @property
    def train_end(self) -> int:
        return self.train_start + self.train_len

    def to_dict(self) -> dict:
        return {"train_start": self.train_start, "train_len": self.train_len, "val_end": self.val_end}


def check_split(split: SplitSpec, history: int, length: int | None = None) -> None:
    if split.train_start < 0:
        raise ContractError("train_start must be >= 0")
    if split.train_len <= history:
        raise ContractError(
            f"train_len {split.train_len} must exceed the window size {history}"
        )
    if split.val_end < split.train_end:
        raise ContractError(
            f"val_end {split.val_end} precedes the end of training {split.train_end}"
        )
    if length is not None and split.val_end > length:
        raise BoundsError(f"val_end {split.val_end} exceeds series length {length}")


def target_ranges(split: SplitSpec, history: int) -> tuple:
    """Target index ranges for training and validation examples."""
    check_split(split, history)
    return (
        range(split.train_start + history, split.train_end),
        range(split.train_end, split.val_end),
    )


@dataclass(frozen=True)
class Normalizer:
    """Min-max statistics from the training range only."""

    feature_names: tuple
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    @property
    def target_scale(self) -> float:
        return self.target_max - self.target_min

    @staticmethod
    def _scale(x, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - lo) / safe, 0.0)

    def normalize_features(self, raw: np.ndarray) -> np.ndarray:
        return self._scale(np.asarray(raw, dtype=np.float64), self.feature_min, self.feature_max)

    def normalize_target(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.target_max > self.target_min:
            return (x - self.target_min) / self.target_scale
        return np.zeros_like(x)

    def denormalize_target(self, z):
        return np.asarray(z, dtype=np.float64) * self.target_scale + self.target_min

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            tuple(d["feature_names"]),
            np.array(d["feature_min"], dtype=np.float64),
            np.array(d["feature_max"], dtype=np.float64),
            float(d["target_min"]),
            float(d["target_max"]),
        )


def fit_normalizer(series: MeasurementSeries, schema: FeatureSchema, split: SplitSpec) -> Normalizer:
    if split.train_len <= 0 or split.train_start < 0:
        raise ContractError("training range is empty")
    if split.train_end > len(series):
        raise BoundsError(f"training range ends at {split.train_end}, series has {len(series)}")
    lo, hi = split.train_start, split.train_end
    cal = calendar_matrix(series.timestamp(lo), hi - lo, schema.calendar_names)
    values = series.values[lo:hi]
    return Normalizer(
        schema.calendar_names,
        cal.min(axis=0),
        cal.max(axis=0),
        float(values.min()),
        float(values.max()),
    )


class FeatureFrame:
    """Normalized measurements and calendar features laid out for indexing.

    ``values`` is a private writable copy so autoregressive loops can
    overwrite future slots with predictions.  Calendar rows may extend
    past the end of the series for forecasting beyond the data.
    """

    def __init__(self, series: MeasurementSeries, schema: FeatureSchema,
                 normalizer: Normalizer, length: int | None = None):
        length = len(series) if length is None else length
        self.schema = schema
        self.normalizer = normalizer
        self.start = series.start
        self.length = length
        self.values = np.zeros(length)
        n = min(length, len(series))
        self.values[:n] = normalizer.normalize_target(series.values[:n])
        self.calendar = normalizer.normalize_features(
            calendar_matrix(series.start, length, schema.calendar_names)
        )

    def inputs(self, targets, values: np.ndarray | None = None) -> np.ndarray:
        """Model inputs for each target index, stacked on axis 0.

        ``values`` substitutes another normalized measurement buffer, e.g.
        one partly overwritten with fed-back predictions.
        """
        values = self.values if values is None else values
        targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
        n = self.schema.window
        if len(targets) and (targets.min() < n or targets.max() >= self.length):
            raise BoundsError(f"targets need indices [{targets.min() - n}, {targets.max()}]")
        if self.schema.input_mode == "sequence":
            idx = targets[:, None] + np.arange(-n, 0)[None, :]
            return np.concatenate([values[idx][..., None], self.calendar[idx]], axis=-1)
        if n == 0:
            return self.calendar[targets].copy()
        idx = targets[:, None] + np.arange(-n, 0)[None, :]
        return np.concatenate([self.calendar[targets], values[idx]], axis=1)


@dataclass(frozen=True)
class Example:
    index: int
    input: np.ndarray
    target: float
    target_raw: float


def build_examples(series: MeasurementSeries, schema: FeatureSchema,
                   normalizer: Normalizer, targets: range) -> list:
    """One example per target index, in chronological order."""
    targets = range(targets.start, targets.stop) if not isinstance(targets, range) else targets
    if len(targets) == 0:
        return []
    if targets.start < schema.window:
        raise BoundsError(
            f"target {targets.start} needs {schema.window} earlier measurements"
        )
    if targets.stop > len(series) or targets.start < 0:
        raise BoundsError(f"targets {targets} exceed series of length {len(series)}")
    frame = FeatureFrame(series, schema, normalizer)
    idx = np.arange(targets.start, targets.stop)
    inputs = frame.inputs(idx)
    return [
        Example(int(k), x, float(frame.values[k]), float(series.values[k]))
        for k, x in zip(idx, inputs)
    ]


def split_dataset(series: MeasurementSeries, schema: FeatureSchema, split: SplitSpec,
                  normalizer: Normalizer | None = None) -> tuple:
    check_split(split, schema.history, len(series))
    if normalizer is None:
        normalizer = fit_normalizer(series, schema, split)
    train_range, val_range = target_ranges(split, schema.history)
    return (
        build_examples(series, schema, normalizer, train_range),
        build_examples(series, schema, normalizer, val_range),
    )
