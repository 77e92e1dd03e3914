"""Hourly multivariate panels: CSV ingestion, alignment, calendar encoding, scaling.

A :class:`Panel` is an immutable block of aligned hourly series for one region.
Cells carry an ``observed`` flag; a masked cell's value is NaN.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

HOUR = np.timedelta64(1, "h")

CALENDAR_COLUMNS = (
    "hour_sin", "hour_cos",
    "dow_sin", "dow_cos",
    "month_sin", "month_cos",
    "doy_sin", "doy_cos",
    "holiday",
)
LOAD_COLUMN = "load"
PREMISE_COLUMN = "premise_count"

LOAD_HEADER = ("timestamp", "region", "premise_count", "consumption_kwh")


@dataclass(frozen=True)
class Panel:
    """Aligned hourly series for one region.

    Parameters
    ----------
    timestamps : ndarray of datetime64[s]
        UTC instants (naive), strictly increasing with a constant 1 h step.
    columns : tuple of str
        Column names, in storage order.
    values : ndarray, shape (T, C)
        Float data; NaN where ``observed`` is False.
    observed : ndarray of bool, shape (T, C)
    region : str
    """

    timestamps: np.ndarray
    columns: tuple
    values: np.ndarray
    observed: np.ndarray
    region: str = ""

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        values = np.array(self.values, dtype=float, copy=True)
        observed = np.array(self.observed, dtype=bool, copy=True)
        columns = tuple(self.columns)
        if values.ndim != 2 or values.shape != (len(ts), len(columns)):
            raise DataError(
                f"values shape {values.shape} does not match "
                f"{len(ts)} timestamps x {len(columns)} columns"
            )
        if observed.shape != values.shape:
            raise DataError("observed mask shape differs from values shape")
        if len(set(columns)) != len(columns):
            raise DataError(f"duplicate column names in {columns}")
        if len(ts) > 1 and not np.all(np.diff(ts) == HOUR):
            raise DataError("timestamps must be strictly increasing with a 1 h step")
        values[~observed] = np.nan
        observed &= np.isfinite(values)
        for arr in (ts, values, observed):
            arr.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "columns", columns)

    def __len__(self):
        return len(self.timestamps)

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r} in panel (have {list(self.columns)})") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def mask(self, name: str) -> np.ndarray:
        return self.observed[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "Panel":
        idx = [self.index(n) for n in names]
        return Panel(self.timestamps, tuple(names), self.values[:, idx],
                     self.observed[:, idx], self.region)

    def rows(self, start: int, stop: int) -> "Panel":
        return Panel(self.timestamps[start:stop], self.columns, self.values[start:stop],
                     self.observed[start:stop], self.region)

    def with_columns(self, block: dict) -> "Panel":
        """Return a panel with ``block`` (name -> array) appended or replaced."""
        cols = list(self.columns)
        values = [self.values[:, i] for i in range(len(cols))]
        for name, arr in block.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (len(self),):
                raise DataError(f"column {name!r} has length {arr.shape}, expected {len(self)}")
            if name in cols:
                values[cols.index(name)] = arr
            else:
                cols.append(name)
                values.append(arr)
        data = np.column_stack(values) if values else np.empty((len(self), 0))
        return Panel(self.timestamps, tuple(cols), data, np.isfinite(data), self.region)

    def fully_observed(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Row mask, True where every named column is observed."""
        if names is None:
            return self.observed.all(axis=1)
        return self.observed[:, [self.index(n) for n in names]].all(axis=1)

    def equals(self, other: "Panel") -> bool:
        return (
            self.region == other.region
            and self.columns == other.columns
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def parse_timestamp(text: str) -> np.datetime64:
    """Parse an ISO-8601 instant to naive-UTC ``datetime64[s]``.

    Offsets are converted to UTC; naive stamps are taken as UTC already.
    """
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt.replace(microsecond=0), "s")


def _hourly_grid(stamps: np.ndarray) -> np.ndarray:
    first, last = stamps.min(), stamps.max()
    n = int((last - first) // HOUR) + 1
    return first + np.arange(n) * HOUR


def _to_grid(stamps, values, columns, region):
    """Place per-stamp rows on a gap-filled hourly grid (gaps become masked)."""
    stamps = np.asarray(stamps, dtype="datetime64[s]")
    if np.any((stamps - stamps.astype("datetime64[h]")) != np.timedelta64(0, "s")):
        raise DataError("timestamps must fall on whole hours")
    grid = _hourly_grid(stamps)
    pos = ((stamps - grid[0]) // HOUR).astype(int)
    data = np.full((len(grid), len(columns)), np.nan)
    data[pos] = values
    return Panel(grid, tuple(columns), data, np.isfinite(data), region)


def _float(text, line, col):
    try:
        return float(text) if text.strip() != "" else np.nan
    except ValueError:
        raise DataError(f"line {line}: column {col!r} is not numeric: {text!r}") from None


def ingest_load_csv(path, region: str, consumer_type: str | None = None) -> Panel:
    """Read a load CSV and build the hourly panel for ``region``.

    Rows for the region are summed per timestamp (consumption and premise
    counts across sub-areas). If the file has a ``consumer_type`` column and
    ``consumer_type`` is given, other consumer types are dropped.
    """
    sums: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [h for h in LOAD_HEADER if h not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        pos = {h: header.index(h) for h in header}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            if row[pos["region"]].strip() != region:
                continue
            if consumer_type is not None and "consumer_type" in pos:
                if row[pos["consumer_type"]].strip() != consumer_type:
                    continue
            try:
                ts = parse_timestamp(row[pos["timestamp"]])
            except ValueError:
                raise DataError(f"{path}: line {line}: bad timestamp {row[pos['timestamp']]!r}") from None
            kwh = _float(row[pos["consumption_kwh"]], line, "consumption_kwh")
            prem = _float(row[pos["premise_count"]], line, "premise_count")
            acc = sums.setdefault(ts, [0.0, 0.0])
            acc[0] += kwh
            acc[1] += prem
    if not sums:
        raise DataError(f"{path}: no rows for region {region!r}")
    stamps = np.array(sorted(sums), dtype="datetime64[s]")
    values = np.array([sums[s] for s in stamps.tolist()], dtype=float)
    return _to_grid(stamps, values, (LOAD_COLUMN, PREMISE_COLUMN), region)


def ingest_weather_csv(path, region: str, variables: Sequence[str]) -> Panel:
    """Read a weather CSV keeping exactly ``variables``."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if "timestamp" not in header:
            raise DataError(f"{path}: missing 'timestamp' column")
        for v in variables:
            if v not in header:
                raise DataError(f"{path}: requested weather variable {v!r} not in file")
        tcol = header.index("timestamp")
        vcols = [header.index(v) for v in variables]
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[tcol])
            except ValueError:
                raise DataError(f"{path}: line {line}: bad timestamp {row[tcol]!r}") from None
            if ts in rows:
                raise DataError(f"{path}: line {line}: duplicate timestamp {row[tcol]}")
            rows[ts] = [_float(row[c], line, v) for c, v in zip(vcols, variables)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    stamps = np.array(sorted(rows), dtype="datetime64[s]")
    values = np.array([rows[s] for s in stamps.tolist()], dtype=float).reshape(len(stamps), len(variables))
    return _to_grid(stamps, values, tuple(variables), region)


def join_align(load: Panel, weather: Panel) -> Panel:
    """Intersect two panels' time ranges and take the union of their columns."""
    if load.region != weather.region:
        raise DataError(f"region mismatch: {load.region!r} vs {weather.region!r}")
    overlap = set(load.columns) & set(weather.columns)
    if overlap:
        raise DataError(f"columns present in both panels: {sorted(overlap)}")
    if len(load) == 0 or len(weather) == 0:
        raise DataError("cannot align an empty panel")
    start = max(load.timestamps[0], weather.timestamps[0])
    stop = min(load.timestamps[-1], weather.timestamps[-1])
    if start > stop:
        raise DataError("load and weather time ranges do not overlap")
    a0 = int((start - load.timestamps[0]) // HOUR)
    b0 = int((start - weather.timestamps[0]) // HOUR)
    n = int((stop - start) // HOUR) + 1
    values = np.hstack([load.values[a0:a0 + n], weather.values[b0:b0 + n]])
    observed = np.hstack([load.observed[a0:a0 + n], weather.observed[b0:b0 + n]])
    return Panel(load.timestamps[a0:a0 + n], load.columns + weather.columns,
                 values, observed, load.region)


def read_holidays(path) -> set:
    """One ISO date per line; blank lines and ``#`` comments ignored."""
    days = set()
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            days.add(date.fromisoformat(line))
        except ValueError:
            raise DataError(f"{path}: line {line_no}: bad date {line!r}") from None
    return days


def calendar_features(timestamps, holidays: Iterable = ()) -> dict:
    """Cyclic sine/cosine encodings plus a holiday flag.

    Periods: hour 24, day-of-week 7 (Monday = 0), month 12, day-of-year 365.25.
    """
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    days = ts.astype("datetime64[D]")
    hour = ((ts - days) // HOUR).astype(float)
    dow = ((days.astype(np.int64) + 3) % 7).astype(float)  # 1970-01-01 was a Thursday
    months = ts.astype("datetime64[M]")
    month = (months.astype(np.int64) % 12).astype(float)
    doy = (days - ts.astype("datetime64[Y]").astype("datetime64[D]")).astype(float)
    out = {}
    for name, val, period in (("hour", hour, 24.0), ("dow", dow, 7.0),
                              ("month", month, 12.0), ("doy", doy, 365.25)):
        angle = 2.0 * np.pi * val / period
        out[f"{name}_sin"] = np.sin(angle)
        out[f"{name}_cos"] = np.cos(angle)
    hol = np.array(sorted({np.datetime64(d, "D") for d in holidays}), dtype="datetime64[D]")
    out["holiday"] = np.isin(days, hol).astype(float)
    return out


def add_calendar(panel: Panel, holidays: Iterable = ()) -> Panel:
    return panel.with_columns(calendar_features(panel.timestamps, holidays))


@dataclass(frozen=True)
class ScalerParams:
    columns: tuple
    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple = field(default=())

    def to_dict(self):
        return {
            "columns": list(self.columns),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "degenerate": list(self.degenerate),
        }


def fit_scaler(panel: Panel, rows: tuple | slice | None = None,
               columns: Sequence[str] | None = None) -> ScalerParams:
    """Per-column mean and population std over observed cells in ``rows``.

    A column with zero spread (or a single observation) gets std 1 and is
    listed in ``degenerate``.
    """
    if rows is None:
        rows = slice(0, len(panel))
    elif not isinstance(rows, slice):
        rows = slice(*rows)
    columns = tuple(panel.columns if columns is None else columns)
    sub = panel.rows(rows.start, rows.stop)
    if len(sub) == 0:
        raise DataError("cannot fit a scaler on an empty row range")
    means, stds, degenerate = [], [], []
    for name in columns:
        v = sub.column(name)[sub.mask(name)]
        if v.size == 0:
            raise DataError(f"column {name!r} has no observed values in the fit range")
        m = float(v.mean())
        s = float(v.std())
        if not s > 1e-12 * max(1.0, abs(m)):
            s = 1.0
            degenerate.append(name)
        means.append(m)
        stds.append(s)
    return ScalerParams(columns, np.array(means), np.array(stds), tuple(degenerate))


def apply_scaler(panel: Panel, params: ScalerParams) -> Panel:
    idx = [panel.index(c) for c in params.columns]
    values = np.array(panel.values)
    values[:, idx] = (values[:, idx] - params.mean) / params.std
    return Panel(panel.timestamps, panel.columns, values, panel.observed, panel.region)


def inverse_scaler(panel: Panel, params: ScalerParams) -> Panel:
    idx = [panel.index(c) for c in params.columns]
    values = np.array(panel.values)
    values[:, idx] = values[:, idx] * params.std + params.mean
    return Panel(panel.timestamps, panel.columns, values, panel.observed, panel.region)


# --- canonical panel files -------------------------------------------------

def _format_ts(ts) -> str:
    return str(np.datetime64(ts, "s")) + "Z"


def write_panel(panel: Panel, path) -> tuple:
    """Write ``<path>`` (CSV) and ``<path>.meta.json``; return both paths.

    Masked cells are written as empty fields; floats use ``repr`` so the
    file round-trips exactly.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp",) + panel.columns)
        for t in range(len(panel)):
            w.writerow([_format_ts(panel.timestamps[t])] + [
                repr(float(v)) if ok else ""
                for v, ok in zip(panel.values[t], panel.observed[t])
            ])
    meta_path = path.with_name(path.name + ".meta.json")
    meta = {
        "region": panel.region,
        "columns": list(panel.columns),
        "n_rows": len(panel),
        "start": _format_ts(panel.timestamps[0]) if len(panel) else None,
        "step": "1h",
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, meta_path


def read_panel(path, region: str | None = None) -> Panel:
    """Read a canonical panel CSV (and its metadata file when present)."""
    path = Path(path)
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "timestamp":
            raise DataError(f"{path}: first column must be 'timestamp'")
        columns = tuple(h.strip() for h in header[1:])
        stamps, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                stamps.append(parse_timestamp(row[0]))
            except ValueError:
                raise DataError(f"{path}: line {line}: bad timestamp {row[0]!r}") from None
            rows.append([_float(c, line, n) for c, n in zip(row[1:], columns)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    stamps = np.array(stamps, dtype="datetime64[s]")
    reg = region if region is not None else meta.get("region", path.stem)
    return Panel(stamps, columns, values, np.isfinite(values), reg)
