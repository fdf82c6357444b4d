"""Parsing of day-per-row consumption tables into a half-hourly series.

The raw dataset stores one calendar day per row: a date label followed by
48 half-hour readings in kWh.  ``parse_table`` turns delimiter-separated
text into a :class:`RawTable`; ``flatten`` lays the table out as a
contiguous :class:`MeasurementSeries`, handling missing cells or whole
missing days according to a gap policy.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .errors import ArityError, ContractError, GapError, ParseError, ValidationError

SLOTS_PER_DAY = 48
STEP = timedelta(minutes=30)
SERIES_MAGIC = "ECFC-SERIES v1"


class GapPolicy(str, enum.Enum):
    STRICT = "strict"
    LINEAR_INTERPOLATE = "interpolate"
    FORWARD_FILL = "ffill"


@dataclass(frozen=True)
class Layout:
    """Column map for a raw table.

    ``value_start`` is the index of the first of the 48 consecutive
    half-hour columns.  ``header=None`` auto-detects a header row by
    trying to parse the first row's date cell.
    """

    delimiter: str = ","
    date_column: int = 0
    value_start: int = 1
    date_format: str = "%Y-%m-%d"
    header: bool | None = None

    @property
    def n_columns(self) -> int:
        return max(self.date_column, self.value_start + SLOTS_PER_DAY - 1) + 1


@dataclass(frozen=True)
class RawRow:
    day: date
    values: tuple  # 48 entries, float or None for a missing cell


@dataclass(frozen=True)
class RawTable:
    rows: tuple = ()

    def __len__(self):
        return len(self.rows)

    @property
    def n_cells(self) -> int:
        return len(self.rows) * SLOTS_PER_DAY


@dataclass(frozen=True)
class MeasurementSeries:
    """Readings at a strict 30 minute cadence starting at ``start``."""

    start: datetime
    values: np.ndarray
    gap_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = (
            np.zeros(values.shape, dtype=bool)
            if self.gap_mask is None
            else np.asarray(self.gap_mask, dtype=bool)
        )
        if values.ndim != 1 or mask.shape != values.shape:
            raise ContractError("values and gap_mask must be 1-d and equally long")
        if self.start.minute not in (0, 30) or self.start.second or self.start.microsecond:
            raise ContractError(f"series start {self.start} is off the half-hour grid")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gap_mask", mask)

    def __len__(self):
        return len(self.values)

    def timestamp(self, index: int) -> datetime:
        return self.start + index * STEP

    def timestamps(self, start: int = 0, stop: int | None = None) -> list:
        stop = len(self) if stop is None else stop
        return [self.start + k * STEP for k in range(start, stop)]

    @property
    def n_imputed(self) -> int:
        return int(self.gap_mask.sum())

    def head(self, count: int) -> "MeasurementSeries":
        return MeasurementSeries(self.start, self.values[:count], self.gap_mask[:count])


def _parse_number(cell: str):
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _looks_like_data(cells, layout: Layout) -> bool:
    try:
        datetime.strptime(cells[layout.date_column].strip(), layout.date_format)
    except (ValueError, IndexError):
        return False
    return True


def parse_table(source: bytes | str | IO, layout: Layout = Layout()) -> RawTable:
    """Parse day-per-row text into a RawTable.

    Non-numeric or blank cells become ``None`` so the gap policy can deal
    with them later.  Row numbers in errors are 1-based file lines.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text), delimiter=layout.delimiter)
    rows = []
    previous = None
    first_line = True
    for lineno, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if first_line:
            first_line = False
            if layout.header or (layout.header is None and not _looks_like_data(cells, layout)):
                continue
        if len(cells) != layout.n_columns:
            raise ArityError(
                f"expected {layout.n_columns} columns, found {len(cells)}", row=lineno
            )
        label = cells[layout.date_column].strip()
        try:
            day = datetime.strptime(label, layout.date_format).date()
        except ValueError:
            raise ParseError(f"malformed date label {label!r}", row=lineno) from None
        if previous is not None and day <= previous:
            raise ParseError(f"date {day} does not follow {previous}", row=lineno)
        previous = day
        values = tuple(
            _parse_number(c)
            for c in cells[layout.value_start : layout.value_start + SLOTS_PER_DAY]
        )
        rows.append(RawRow(day, values))
    return RawTable(tuple(rows))


def render_table(table: RawTable, layout: Layout = Layout()) -> str:
    """Inverse of ``parse_table`` for tables laid out with ``layout``."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter=layout.delimiter, lineterminator="\n")
    for row in table.rows:
        cells = [""] * layout.n_columns
        cells[layout.date_column] = row.day.strftime(layout.date_format)
        for k, v in enumerate(row.values):
            cells[layout.value_start + k] = "" if v is None else repr(float(v))
        writer.writerow(cells)
    return out.getvalue()


def _fill_slotwise(grid: np.ndarray, missing: np.ndarray, policy: GapPolicy) -> np.ndarray:
    """Fill a (days, 48) grid column by column, i.e. along the same half hour."""
    filled = grid.copy()
    days = np.arange(grid.shape[0])
    for slot in range(SLOTS_PER_DAY):
        known = ~missing[:, slot]
        if not known.any():
            raise GapError(f"half-hour slot {slot} has no readings on any day")
        if known.all():
            continue
        column = grid[known, slot]
        if policy is GapPolicy.LINEAR_INTERPOLATE:
            # np.interp holds the end values constant outside the known range
            filled[~known, slot] = np.interp(days[~known], days[known], column)
        else:
            last = np.maximum.accumulate(np.where(known, days, -1))
            # leading gaps take the first known reading
            last[last < 0] = days[known][0]
            filled[:, slot] = grid[last, slot]
    return filled


def flatten(table: RawTable, gap_policy: GapPolicy | str = GapPolicy.STRICT) -> MeasurementSeries:
    """Lay a RawTable out day-major as a half-hourly series.

    Days absent from the table are treated as 48 missing cells.  Gaps are
    filled along the same half hour of neighbouring days: the interpolating
    policy draws a straight line between the nearest known days, the
    forward-fill policy repeats the previous known day.
    """
    policy = GapPolicy(gap_policy)
    if not table.rows:
        raise ContractError("cannot flatten an empty table")
    first = table.rows[0].day
    n_days = (table.rows[-1].day - first).days + 1
    grid = np.zeros((n_days, SLOTS_PER_DAY))
    missing = np.ones((n_days, SLOTS_PER_DAY), dtype=bool)
    for row in table.rows:
        d = (row.day - first).days
        for k, v in enumerate(row.values):
            if v is not None:
                grid[d, k] = v
                missing[d, k] = False

    negative = (grid < 0) & ~missing
    if negative.any():
        d, k = map(int, np.argwhere(negative)[0])
        ts = datetime.combine(first, datetime.min.time()) + (d * SLOTS_PER_DAY + k) * STEP
        raise ValidationError(f"negative reading {grid[d, k]} at {ts.isoformat()}")

    if missing.any():
        if policy is GapPolicy.STRICT:
            d, k = map(int, np.argwhere(missing)[0])
            ts = datetime.combine(first, datetime.min.time()) + (d * SLOTS_PER_DAY + k) * STEP
            raise GapError(f"missing reading at {ts.isoformat()}", timestamp=ts)
        grid = _fill_slotwise(grid, missing, policy)

    start = datetime.combine(first, datetime.min.time())
    return MeasurementSeries(start, grid.ravel(), missing.ravel())


def write_series(series: MeasurementSeries, path: str | Path) -> None:
    """Write the canonical series file: magic line then timestamp,value,flag."""
    lines = [SERIES_MAGIC]
    for k, (v, m) in enumerate(zip(series.values.tolist(), series.gap_mask.tolist())):
        lines.append(f"{series.timestamp(k).isoformat()},{v!r},{int(m)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_series(path: str | Path) -> MeasurementSeries:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != SERIES_MAGIC:
        raise ParseError(f"{path}: not an {SERIES_MAGIC} file", row=1)
    stamps, values, mask = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ArityError(f"expected 3 fields, found {len(parts)}", row=lineno)
        try:
            stamps.append(datetime.fromisoformat(parts[0]))
            values.append(float(parts[1]))
            mask.append(parts[2].strip() == "1")
        except ValueError as exc:
            raise ParseError(str(exc), row=lineno) from None
    if not stamps:
        raise ParseError(f"{path}: series file has no points")
    for k in range(1, len(stamps)):
        if stamps[k] - stamps[k - 1] != STEP:
            raise GapError(
                f"series cadence broken at {stamps[k].isoformat()}", timestamp=stamps[k]
            )
    values = np.array(values)
    if (values < 0).any():
        k = int(np.argmax(values < 0))
        raise ValidationError(f"negative reading {values[k]} at {stamps[k].isoformat()}")
    return MeasurementSeries(stamps[0], values, np.array(mask, dtype=bool))


def series_from_values(values: Iterable[float],
                       start: datetime = datetime(2012, 1, 2)) -> MeasurementSeries:
    return MeasurementSeries(start, np.asarray(list(values), dtype=np.float64))
