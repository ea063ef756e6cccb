"""CMAPSS-format engine series: parsing, RUL labeling, summary statistics.

The raw format is one record per line, 26 whitespace-separated numbers, no
header: unit id, cycle, three operational settings, 21 sensor readings.
The NASA files use double-space separators and trailing blanks, so parsing
splits on any whitespace run and ignores blank lines. Parsing is fail-fast:
a malformed row aborts with its row index rather than being repaired,
because silently fixed input would skew the RUL labels derived from it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, DataIntegrityError

N_OP_SETTINGS = 3
N_SENSORS = 21
N_COLUMNS = 2 + N_OP_SETTINGS + N_SENSORS

COLUMN_NAMES: tuple[str, ...] = (
    "unit_id",
    "cycle",
    *(f"op_setting_{i}" for i in range(1, N_OP_SETTINGS + 1)),
    *(f"sensor_{i}" for i in range(1, N_SENSORS + 1)),
)


@dataclass(frozen=True)
class EngineSeriesSet:
    """Multi-engine time series, grouped by unit and ordered by cycle.

    ``values`` is an (n_rows, 26) float64 array whose columns follow
    COLUMN_NAMES. ``unit_starts`` holds n_units + 1 row offsets so that
    unit i occupies values[unit_starts[i]:unit_starts[i+1]]. ``rul`` is
    None for unlabeled sets, otherwise cycles-to-failure per row.
    """

    values: np.ndarray
    unit_ids: np.ndarray
    unit_starts: np.ndarray
    rul: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_units(self) -> int:
        return self.unit_ids.shape[0]

    @property
    def unit_lengths(self) -> np.ndarray:
        return np.diff(self.unit_starts)

    @property
    def labeled(self) -> bool:
        return self.rul is not None

    def unit_slice(self, index: int) -> slice:
        return slice(int(self.unit_starts[index]), int(self.unit_starts[index + 1]))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COLUMN_NAMES.index(name)]

    def columns(self, names) -> np.ndarray:
        idx = [COLUMN_NAMES.index(n) for n in names]
        return self.values[:, idx]


@dataclass(frozen=True)
class DatasetSummary:
    """Per-column moments plus unit cycle statistics.

    ``std`` uses the population divisor n. ``n_unique`` counts exact
    float64 distinctness; CMAPSS values come from finite-precision text,
    so exact comparison is stable.
    """

    n_units: int
    n_rows: int
    cycles_min: int
    cycles_max: int
    cycles_mean: float
    column_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    n_unique: np.ndarray

    def column_stats(self, name: str) -> tuple[float, float, int]:
        i = self.column_names.index(name)
        return float(self.mean[i]), float(self.std[i]), int(self.n_unique[i])


def _scan_for_bad_row(text: str) -> None:
    """Re-scan raw text to pinpoint the first malformed row.

    Only reached on the error path; the happy path never pays for this.
    Row indices are 1-based over non-blank lines, matching what a user
    sees in an editor with blank lines ignored.
    """
    row = 0
    for line in text.splitlines():
        tokens = line.split()
        if not tokens:
            continue
        row += 1
        if len(tokens) != N_COLUMNS:
            raise DataFormatError(
                f"row {row} has {len(tokens)} values, expected {N_COLUMNS}"
            )
        for tok in tokens:
            try:
                float(tok)
            except ValueError:
                raise DataFormatError(
                    f"row {row} contains a non-numeric value: {tok!r}"
                ) from None


def parse_series_text(text: str) -> EngineSeriesSet:
    """Parse CMAPSS-format text into a validated, unlabeled series set."""
    if not text.strip():
        raise DataFormatError("no data rows found")
    try:
        values = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=2)
    except ValueError as exc:
        _scan_for_bad_row(text)
        raise DataFormatError(str(exc)) from exc
    if values.size == 0:
        raise DataFormatError("no data rows found")
    if values.shape[1] != N_COLUMNS:
        _scan_for_bad_row(text)
        raise DataFormatError(
            f"rows have {values.shape[1]} values, expected {N_COLUMNS}"
        )
    return series_from_values(values)


def load_series(path) -> EngineSeriesSet:
    return parse_series_text(Path(path).read_text())


def series_from_values(values: np.ndarray, rul: np.ndarray | None = None) -> EngineSeriesSet:
    """Build an EngineSeriesSet from a raw (n, 26) array, validating invariants.

    Rows are sorted by (unit_id, cycle) if not already ordered; cycles must
    then form the consecutive run 1..max_cycle within every unit.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != N_COLUMNS:
        raise DataFormatError(f"expected an (n, {N_COLUMNS}) array, got {values.shape}")
    if values.shape[0] == 0:
        raise DataFormatError("no data rows found")

    units = values[:, 0]
    cycles = values[:, 1]
    for col, name in ((units, "unit_id"), (cycles, "cycle")):
        if not np.all(np.isfinite(col)) or np.any(col != np.floor(col)):
            raise DataFormatError(f"{name} column must contain integers")
        if np.any(col < 1):
            raise DataFormatError(f"{name} column must be >= 1")

    order = np.lexsort((cycles, units))
    if not np.array_equal(order, np.arange(values.shape[0])):
        values = values[order]
        if rul is not None:
            rul = np.asarray(rul)[order]
        units = values[:, 0]
        cycles = values[:, 1]

    unit_ids64 = units.astype(np.int64)
    boundaries = np.flatnonzero(np.diff(unit_ids64)) + 1
    unit_starts = np.concatenate(([0], boundaries, [values.shape[0]])).astype(np.int64)
    unit_ids = unit_ids64[unit_starts[:-1]]

    for i in range(unit_ids.shape[0]):
        c = cycles[unit_starts[i] : unit_starts[i + 1]]
        if c[0] != 1 or np.any(np.diff(c) != 1):
            raise DataIntegrityError(
                f"unit {int(unit_ids[i])}: cycles are not the consecutive run 1..max"
            )

    if rul is not None:
        rul = np.asarray(rul, dtype=np.int64)
        if rul.shape != (values.shape[0],):
            raise DataFormatError("rul labels must have one value per row")

    values = values.copy()
    values.setflags(write=False)
    unit_ids.setflags(write=False)
    unit_starts.setflags(write=False)
    if rul is not None:
        rul = rul.copy()
        rul.setflags(write=False)
    return EngineSeriesSet(values=values, unit_ids=unit_ids, unit_starts=unit_starts, rul=rul)


def parse_rul_text(text: str) -> list[int]:
    """Parse a RUL file: one non-negative integer per line, blank lines ignored."""
    out: list[int] = []
    row = 0
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        row += 1
        try:
            value = int(stripped)
        except ValueError:
            raise DataFormatError(
                f"RUL row {row} is not an integer: {stripped!r}"
            ) from None
        if value < 0:
            raise DataFormatError(f"RUL row {row} is negative: {value}")
        out.append(value)
    if not out:
        raise DataFormatError("no RUL values found")
    return out


def load_rul(path) -> list[int]:
    return parse_rul_text(Path(path).read_text())


def attach_linear_rul(series: EngineSeriesSet) -> EngineSeriesSet:
    """Label every record with max_cycle(unit) - cycle.

    The last record of each unit gets RUL 0 (failure row); labels decrease
    strictly by 1 per cycle within a unit.
    """
    if series.labeled:
        raise ConfigError("series is already labeled with RUL values")
    lengths = series.unit_lengths
    cycles = series.values[:, 1].astype(np.int64)
    max_cycle = np.repeat(lengths, lengths)
    rul = max_cycle - cycles
    rul.setflags(write=False)
    return replace(series, rul=rul)


def select_units(series: EngineSeriesSet, unit_ids) -> EngineSeriesSet:
    """Return the sub-series holding exactly the requested units (ascending)."""
    wanted = np.unique(np.asarray(unit_ids, dtype=np.int64))
    missing = np.setdiff1d(wanted, series.unit_ids)
    if missing.size:
        raise ConfigError(f"unknown unit ids: {missing.tolist()}")
    keep_rows = np.isin(series.values[:, 0].astype(np.int64), wanted)
    rul = series.rul[keep_rows] if series.labeled else None
    return series_from_values(series.values[keep_rows], rul=rul)


def summarize(series: EngineSeriesSet) -> DatasetSummary:
    """Exact per-column mean, population std, and unique count, plus cycle stats."""
    if series.n_rows == 0:
        raise ConfigError("cannot summarize an empty series set")
    values = series.values
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population divisor n
    n_unique = np.array(
        [np.unique(values[:, j]).size for j in range(values.shape[1])], dtype=np.int64
    )
    lengths = series.unit_lengths
    return DatasetSummary(
        n_units=series.n_units,
        n_rows=series.n_rows,
        cycles_min=int(lengths.min()),
        cycles_max=int(lengths.max()),
        cycles_mean=float(lengths.mean()),
        column_names=COLUMN_NAMES,
        mean=mean,
        std=std,
        n_unique=n_unique,
    )


def serialize_series(series: EngineSeriesSet) -> str:
    """Render back to the text format; floats use shortest round-trip repr."""
    lines = []
    for row in series.values:
        fields = [str(int(row[0])), str(int(row[1]))]
        fields.extend(repr(float(v)) for v in row[2:])
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"
