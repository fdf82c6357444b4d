"""MAE and MAPE with an explicit policy for zero-valued actuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, UndefinedMetricError

DEFAULT_ZERO_FLOOR = 1e-9


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape or a.ndim != 1 or a.size == 0:
        raise ContractError("metrics need two equally long, nonempty 1-d sequences")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def mape(actual, predicted, zero_floor: float = DEFAULT_ZERO_FLOOR):
    """Percentage error over pairs with |actual| > zero_floor.

    Returns ``(percent, n_excluded)``.
    """
    if zero_floor < 0:
        raise ContractError("zero_floor must be >= 0")
    a, p = _pair(actual, predicted)
    keep = np.abs(a) > zero_floor
    if not keep.any():
        raise UndefinedMetricError("MAPE undefined: every actual is within the zero floor")
    pct = 100.0 * float(np.mean(np.abs(a[keep] - p[keep]) / np.abs(a[keep])))
    return pct, int(a.size - keep.sum())


@dataclass(frozen=True)
class MetricReport:
    mae: float
    mape: float
    n_points: int
    n_excluded: int


def report(actual, predicted, zero_floor: float = DEFAULT_ZERO_FLOOR) -> MetricReport:
    pct, excluded = mape(actual, predicted, zero_floor)
    return MetricReport(mae(actual, predicted), pct, len(actual) - excluded, excluded)
