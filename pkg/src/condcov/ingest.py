"""CSV ingest for monitoring data: parsing, filtering, gap handling.

Monitoring exports are long CSV files with one timestamp column and
numeric channels; short sensor dropouts appear as empty cells. The
ingester parses and time-sorts the rows, applies an inclusive date
window, then either linearly interpolates interior gaps against time
(never extrapolating: rows before the first or after the last complete
observation are dropped) or drops incomplete rows. Every decision is
counted in a gap report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

import numpy as np
import pandas as pd

from .core import Dataset
from .errors import (
    EmptyAfterFilter,
    NonMonotoneTimestamps,
    ParseError,
)

DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


class MissingPolicy(str, Enum):
    """What to do with missing cells after the date filter."""

    INTERPOLATE = "interpolate"
    DROP = "drop"


@dataclass(frozen=True)
class IngestSpec:
    """Where and how to read a monitoring CSV.

    ``covariate_columns`` and ``output_columns`` name the numeric
    channels; ``start``/``end`` bound an inclusive time window (strings
    in the timestamp format, or anything ``pandas.Timestamp`` accepts).
    """

    path: str
    covariate_columns: tuple[str, ...]
    output_columns: tuple[str, ...]
    timestamp_column: str = "timestamp"
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT
    start: str | None = None
    end: str | None = None
    missing: MissingPolicy = MissingPolicy.INTERPOLATE
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(
            self, "covariate_columns", tuple(self.covariate_columns)
        )
        object.__setattr__(self, "output_columns", tuple(self.output_columns))
        object.__setattr__(self, "missing", MissingPolicy(self.missing))
        if not self.covariate_columns or not self.output_columns:
            raise ParseError("covariate and output column lists must be non-empty")
        overlap = set(self.covariate_columns) & set(self.output_columns)
        if overlap:
            raise ParseError(
                f"columns cannot be both covariate and output: {sorted(overlap)}"
            )


@dataclass
class GapReport:
    """Row and cell accounting for one ingest run."""

    rows_read: int = 0
    rows_in_window: int = 0
    leading_dropped: int = 0
    trailing_dropped: int = 0
    rows_dropped_missing: int = 0
    interpolated_cells: dict[str, int] = field(default_factory=dict)
    rows_final: int = 0

    def summary_lines(self) -> list[str]:
        lines = [
            f"rows read: {self.rows_read}",
            f"rows in window: {self.rows_in_window}",
            f"leading rows dropped (incomplete): {self.leading_dropped}",
            f"trailing rows dropped (incomplete): {self.trailing_dropped}",
            f"rows dropped for missing values: {self.rows_dropped_missing}",
        ]
        total = sum(self.interpolated_cells.values())
        lines.append(f"cells linearly interpolated: {total}")
        for name, count in self.interpolated_cells.items():
            if count:
                lines.append(f"  {name}: {count}")
        lines.append(f"rows final: {self.rows_final}")
        return lines


@dataclass(frozen=True)
class IngestResult:
    dataset: Dataset
    report: GapReport


def _parse_timestamps(series: pd.Series, spec: IngestSpec) -> pd.Series:
    try:
        return pd.to_datetime(series, format=spec.timestamp_format, errors="raise")
    except (ValueError, TypeError) as exc:
        raise ParseError(
            f"{spec.path}: cannot parse column {spec.timestamp_column!r} "
            f"with format {spec.timestamp_format!r}: {exc}"
        ) from exc


def _window_bound(value, spec: IngestSpec, which: str):
    if value is None:
        return None
    try:
        return pd.Timestamp(value)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"cannot parse {which} bound {value!r}: {exc}") from exc


def ingest(spec: IngestSpec) -> IngestResult:
    """Read, filter, and gap-handle one monitoring CSV.

    Returns the finished :class:`~condcov.core.Dataset` (timestamps in
    epoch seconds) together with a :class:`GapReport`. Structural
    problems (missing columns, unparsable timestamps or window bounds,
    duplicate timestamps) raise; too few surviving rows raises
    :class:`~condcov.errors.EmptyAfterFilter`.
    """
    try:
        # The round-trip converter parses floating-point text exactly the
        # way Python's float() does, so ingesting a file written by
        # write_dataset_csv reproduces the same binary values.
        frame = pd.read_csv(spec.path, sep=spec.delimiter, float_precision="round_trip")
    except (
        pd.errors.ParserError,
        pd.errors.EmptyDataError,
        UnicodeDecodeError,
        OSError,
    ) as exc:
        raise ParseError(f"{spec.path}: {exc}") from exc
    value_columns = list(spec.covariate_columns) + list(spec.output_columns)
    missing_cols = [
        c for c in [spec.timestamp_column, *value_columns] if c not in frame.columns
    ]
    if missing_cols:
        raise ParseError(
            f"{spec.path}: missing column(s) {missing_cols}; "
            f"found {list(frame.columns)}"
        )
    report = GapReport(rows_read=len(frame))

    times = _parse_timestamps(frame[spec.timestamp_column], spec)
    frame = frame.assign(**{spec.timestamp_column: times})
    frame = frame.sort_values(spec.timestamp_column, kind="stable").reset_index(
        drop=True
    )
    if frame[spec.timestamp_column].duplicated().any():
        dup = frame[spec.timestamp_column][
            frame[spec.timestamp_column].duplicated()
        ].iloc[0]
        raise NonMonotoneTimestamps(f"{spec.path}: duplicate timestamp {dup}")

    start = _window_bound(spec.start, spec, "start")
    end = _window_bound(spec.end, spec, "end")
    if start is not None:
        frame = frame[frame[spec.timestamp_column] >= start]
    if end is not None:
        frame = frame[frame[spec.timestamp_column] <= end]
    frame = frame.reset_index(drop=True)
    report.rows_in_window = len(frame)
    if len(frame) == 0:
        raise EmptyAfterFilter(f"{spec.path}: no rows inside the date window")

    values = frame[value_columns].apply(pd.to_numeric, errors="coerce")
    mask = values.notna()

    if spec.missing is MissingPolicy.DROP:
        keep = mask.all(axis=1)
        report.rows_dropped_missing = int((~keep).sum())
        frame = frame[keep].reset_index(drop=True)
        values = values[keep].reset_index(drop=True)
        report.interpolated_cells = {c: 0 for c in value_columns}
    else:
        bad = [c for c in value_columns if not mask[c].any()]
        if bad:
            raise EmptyAfterFilter(f"{spec.path}: column(s) entirely missing: {bad}")
        first = max(int(mask[c].idxmax()) for c in value_columns)
        last = min(int(mask[c][::-1].idxmax()) for c in value_columns)
        report.leading_dropped = first
        report.trailing_dropped = len(frame) - 1 - last
        frame = frame.iloc[first : last + 1].reset_index(drop=True)
        values = values.iloc[first : last + 1].reset_index(drop=True)
        t = frame[spec.timestamp_column].astype("int64").to_numpy() // 10**9
        counts = {}
        for c in value_columns:
            col = values[c].to_numpy(dtype=np.float64)
            gap = np.isnan(col)
            counts[c] = int(gap.sum())
            if counts[c]:
                col[gap] = np.interp(t[gap], t[~gap], col[~gap])
                values[c] = col
        report.interpolated_cells = counts

    if len(frame) < 2:
        raise EmptyAfterFilter(
            f"{spec.path}: only {len(frame)} usable row(s) remain after "
            "filtering; at least 2 are required"
        )
    report.rows_final = len(frame)

    seconds = (
        frame[spec.timestamp_column].astype("int64").to_numpy() // 10**9
    ).astype(np.float64)
    dataset = Dataset(
        Z=values[list(spec.covariate_columns)].to_numpy(dtype=np.float64),
        X=values[list(spec.output_columns)].to_numpy(dtype=np.float64),
        timestamps=seconds,
        covariate_names=spec.covariate_columns,
        output_names=spec.output_columns,
    )
    return IngestResult(dataset=dataset, report=report)


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write a dataset back to CSV, round-trippable through :func:`ingest`.

    Floats are written in shortest round-trip form, timestamps (when
    present) as UTC ``YYYY-MM-DD HH:MM:SS``, so re-ingesting the file
    with the same column roles reproduces the dataset exactly.
    """
    names = ["timestamp"] if dataset.timestamps is not None else []
    names += list(dataset.covariate_names) + list(dataset.output_names)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(dataset.n):
            row = []
            if dataset.timestamps is not None:
                stamp = datetime.fromtimestamp(
                    dataset.timestamps[i], tz=timezone.utc
                )
                row.append(stamp.strftime(DEFAULT_TIMESTAMP_FORMAT))
            row += [repr(float(v)) for v in dataset.Z[i]]
            row += [repr(float(v)) for v in dataset.X[i]]
            writer.writerow(row)
