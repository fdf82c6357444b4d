"""Synthetic half-hourly load with a known generator, for fixtures and checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np

from .features import calendar_matrix
from .ingest import SLOTS_PER_DAY, MeasurementSeries


@dataclass(frozen=True)
class SynthParams:
    """value = base + amplitude * sin(2 pi h / 48) * (1 + weekly * weekday_factor) + noise

    ``weekday_factor`` is +1 Monday to Friday and -1 at weekends.  Noise is
    Gaussian with standard deviation ``noise``; ``None`` means 2% of the
    amplitude.  Values are clipped at zero.
    """

    days: int = 60
    base: float = 100.0
    amplitude: float = 40.0
    weekly: float = 0.25
    noise: float | None = None
    seed: int = 0
    start: str = "2012-01-02"

    @property
    def noise_sigma(self) -> float:
        return 0.02 * self.amplitude if self.noise is None else self.noise

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise_sigma"] = self.noise_sigma
        return d


def weekday_factor(day_of_week):
    return np.where(np.asarray(day_of_week) < 5, 1.0, -1.0)


def clean_signal(params: SynthParams, count: int | None = None) -> np.ndarray:
    count = params.days * SLOTS_PER_DAY if count is None else count
    cal = calendar_matrix(datetime.fromisoformat(params.start), count, ("half_hour", "day_of_week"))
    daily = np.sin(2.0 * np.pi * cal[:, 0] / SLOTS_PER_DAY)
    return params.base + params.amplitude * daily * (1.0 + params.weekly * weekday_factor(cal[:, 1]))


def synthesize(params: SynthParams = SynthParams()) -> MeasurementSeries:
    """Deterministic in ``seed``; a longer series extends a shorter one."""
    count = params.days * SLOTS_PER_DAY
    rng = np.random.default_rng(params.seed)
    values = clean_signal(params, count) + params.noise_sigma * rng.standard_normal(count)
    return MeasurementSeries(datetime.fromisoformat(params.start), np.maximum(values, 0.0))
