"""CDR ingestion: parse call-detail logs and roll them up into gap-free
per-user daily traffic series.

A record is attributed entirely to the calendar date of its start time;
calls spanning midnight are not split. The reported duration field is
authoritative even when it disagrees with end minus start (disagreements
are counted, not rejected).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np


class CdrParseError(ValueError):
    """A CDR line that cannot be turned into a valid record."""


class MalformedLine(CdrParseError):
    """Wrong field count, or a field that is not of the expected shape."""


class BadTimestamp(CdrParseError):
    """Timestamp is not 14 digits, not a valid calendar instant, or the
    end precedes the start."""


class NegativeDuration(CdrParseError):
    """Duration field parsed to a negative number of seconds."""


class MissingCache(FileNotFoundError):
    """A series cache directory is absent or incomplete."""


@dataclass(frozen=True)
class FieldLayout:
    """Positions of the five relevant columns in a delimited CDR line.

    The default matches the 13-column operator export this tool was built
    around: subscriber id, call type, peer id, toll type, roam type, start
    time, end time, duration, plus five cell/city columns that are skipped.
    """

    field_count: int = 13
    service_nbr: int = 0
    opposite_no: int = 2
    start_time: int = 5
    end_time: int = 6
    duration: int = 7
    delimiter: str = ","


DEFAULT_LAYOUT = FieldLayout()

_STAMP_FORMAT = "%Y%m%d%H%M%S"


@dataclass(frozen=True)
class CdrRecord:
    """One parsed call: who called, when, and for how many seconds."""

    service_nbr: str
    opposite_no: str
    start_time: datetime
    end_time: datetime
    duration: int


@dataclass(frozen=True)
class ObservationWindow:
    """Inclusive calendar range the daily series are defined over."""

    first_day: date
    last_day: date

    def __post_init__(self) -> None:
        if self.last_day < self.first_day:
            raise ValueError(f"window ends {self.last_day} before it starts {self.first_day}")

    @property
    def day_count(self) -> int:
        return (self.last_day - self.first_day).days + 1

    def day_index(self, day: date) -> int:
        """Offset of ``day`` from the window start; may fall outside [0, day_count)."""
        return (day - self.first_day).days


@dataclass
class DailyTrafficSeries:
    """Seconds of voice traffic per day for one user, zero-filled over the window."""

    user: str
    window: ObservationWindow
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 1 or len(self.values) != self.window.day_count:
            raise ValueError(
                f"series for {self.user!r} has {len(self.values)} values, "
                f"window spans {self.window.day_count} days"
            )
        if np.any(self.values < 0):
            raise ValueError(f"series for {self.user!r} contains negative seconds")


def parse_timestamp(raw: str) -> datetime:
    """Parse a 14-digit ``YYYYMMDDhhmmss`` local-time stamp."""
    if len(raw) != 14 or not raw.isdigit():
        raise BadTimestamp(f"expected 14 digits, got {raw!r}")
    try:
        return datetime.strptime(raw, _STAMP_FORMAT)
    except ValueError as exc:
        raise BadTimestamp(f"not a valid calendar instant: {raw!r}") from exc


def parse_cdr_line(line: str, layout: FieldLayout = DEFAULT_LAYOUT) -> CdrRecord:
    """Parse one delimited CDR line into a record.

    Raises MalformedLine, BadTimestamp, or NegativeDuration; callers doing
    bulk ingestion should catch CdrParseError and count rather than abort.
    """
    parts = line.rstrip("\r\n").split(layout.delimiter)
    if len(parts) != layout.field_count:
        raise MalformedLine(f"expected {layout.field_count} fields, got {len(parts)}")
    start = parse_timestamp(parts[layout.start_time].strip())
    end = parse_timestamp(parts[layout.end_time].strip())
    if end < start:
        raise BadTimestamp(f"end {end} precedes start {start}")
    raw_duration = parts[layout.duration].strip()
    try:
        duration = int(raw_duration)
    except ValueError as exc:
        raise MalformedLine(f"duration is not an integer: {raw_duration!r}") from exc
    if duration < 0:
        raise NegativeDuration(f"duration {duration} < 0")
    return CdrRecord(
        service_nbr=parts[layout.service_nbr].strip(),
        opposite_no=parts[layout.opposite_no].strip(),
        start_time=start,
        end_time=end,
        duration=duration,
    )


@dataclass
class IngestDiagnostics:
    """Counters describing what happened to every input line."""

    records_read: int = 0
    parsed: int = 0
    malformed: int = 0
    bad_timestamp: int = 0
    negative_duration: int = 0
    duration_mismatch: int = 0
    out_of_window: int = 0

    @property
    def skipped(self) -> int:
        return self.malformed + self.bad_timestamp + self.negative_duration

    def merge(self, other: "IngestDiagnostics") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def as_dict(self) -> dict[str, int]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["skipped"] = self.skipped
        return out


def iter_cdr_records(
    lines: Iterable[str],
    layout: FieldLayout = DEFAULT_LAYOUT,
    diagnostics: IngestDiagnostics | None = None,
) -> Iterator[CdrRecord]:
    """Parse lines into records, skipping dirty rows.

    Blank lines are ignored. Parse failures increment the matching
    diagnostics counter and the line is dropped; a multi-hundred-million
    record pipeline must not abort on one bad row.
    """
    diag = diagnostics if diagnostics is not None else IngestDiagnostics()
    for line in lines:
        if not line.strip():
            continue
        diag.records_read += 1
        try:
            record = parse_cdr_line(line, layout)
        except MalformedLine:
            diag.malformed += 1
            continue
        except NegativeDuration:
            diag.negative_duration += 1
            continue
        except BadTimestamp:
            diag.bad_timestamp += 1
            continue
        diag.parsed += 1
        if record.end_time - record.start_time != timedelta(seconds=record.duration):
            diag.duration_mismatch += 1
        yield record


class DailyAggregator:
    """Accumulates per-user daily second totals over a window.

    Designed as a parallel fold: independent aggregators over record
    shards can be combined with ``merge`` (commutative and associative),
    so no shared mutable state is needed across workers.
    """

    def __init__(self, window: ObservationWindow):
        self.window = window
        self.out_of_window = 0
        self._totals: dict[str, np.ndarray] = {}

    def add(self, record: CdrRecord) -> bool:
        """Fold one record in; returns False if it fell outside the window."""
        idx = self.window.day_index(record.start_time.date())
        if idx < 0 or idx >= self.window.day_count:
            self.out_of_window += 1
            return False
        totals = self._totals.get(record.service_nbr)
        if totals is None:
            totals = self._totals[record.service_nbr] = np.zeros(
                self.window.day_count, dtype=np.int64
            )
        totals[idx] += record.duration
        return True

    def merge(self, other: "DailyAggregator") -> "DailyAggregator":
        if other.window != self.window:
            raise ValueError("cannot merge aggregators over different windows")
        for user, totals in other._totals.items():
            mine = self._totals.get(user)
            if mine is None:
                self._totals[user] = totals.copy()
            else:
                mine += totals
        self.out_of_window += other.out_of_window
        return self

    def series(self) -> dict[str, DailyTrafficSeries]:
        return {
            user: DailyTrafficSeries(user=user, window=self.window, values=totals.copy())
            for user, totals in self._totals.items()
        }


def aggregate_daily(
    records: Iterable[CdrRecord],
    window: ObservationWindow,
    aggregator: DailyAggregator | None = None,
) -> dict[str, DailyTrafficSeries]:
    """Sum call durations per user per start date, zero-filling quiet days.

    Records outside the window are discarded and tallied on the aggregator.
    Pass an existing aggregator to keep its counters visible to the caller.
    """
    agg = aggregator if aggregator is not None else DailyAggregator(window)
    for record in records:
        agg.add(record)
    return agg.series()


SERIES_FILE = "series.csv"
META_FILE = "meta.json"


def write_series_cache(
    series_map: Mapping[str, DailyTrafficSeries],
    cache_dir: Path | str,
    extra_meta: Mapping[str, object] | None = None,
) -> None:
    """Serialize series as ``user_id, day_index, seconds`` rows plus a metadata sidecar.

    Every day of every user is written, so the cache round-trips losslessly
    and is deterministic for a fixed input (users sorted, days in order).
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    users = sorted(series_map)
    window = None
    with open(cache_dir / SERIES_FILE, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "day_index", "seconds"])
        for user in users:
            series = series_map[user]
            if window is None:
                window = series.window
            elif series.window != window:
                raise ValueError("all series in a cache must share one window")
            for day_idx, seconds in enumerate(series.values.tolist()):
                writer.writerow([user, day_idx, seconds])
    meta: dict[str, object] = {
        "first_day": window.first_day.isoformat() if window else None,
        "last_day": window.last_day.isoformat() if window else None,
        "users": len(users),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(cache_dir / META_FILE, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_series_cache(cache_dir: Path | str) -> dict[str, DailyTrafficSeries]:
    """Load a cache written by write_series_cache. Raises MissingCache if absent."""
    cache_dir = Path(cache_dir)
    series_path = cache_dir / SERIES_FILE
    meta_path = cache_dir / META_FILE
    if not series_path.is_file() or not meta_path.is_file():
        raise MissingCache(f"no series cache at {cache_dir}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("first_day") is None:
        return {}
    window = ObservationWindow(
        first_day=date.fromisoformat(meta["first_day"]),
        last_day=date.fromisoformat(meta["last_day"]),
    )
    values: dict[str, np.ndarray] = {}
    with open(series_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "day_index", "seconds"]:
            raise MissingCache(f"unrecognized series file header in {series_path}")
        for user, day_idx, seconds in reader:
            arr = values.get(user)
            if arr is None:
                arr = values[user] = np.zeros(window.day_count, dtype=np.int64)
            arr[int(day_idx)] = int(seconds)
    return {
        user: DailyTrafficSeries(user=user, window=window, values=arr)
        for user, arr in values.items()
    }
