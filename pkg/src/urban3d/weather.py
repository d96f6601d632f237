"""Hourly-ish weather series: types, validation, and the CSV interchange format.

The on-disk format is a four-column CSV with RFC-3339 UTC timestamps::

    timestamp_utc,ghi_wm2,dhi_wm2,temp_c
    2021-01-01T00:00:00Z,0.0,0.0,2.9

A series must cover exactly one calendar year at a fixed step, timestamps
strictly increasing. Irradiance bounds: 0 <= dhi <= ghi <= 1500 W/m^2.
Floats are written with shortest round-trip precision, so write -> read ->
write is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import FormatError

GHI_MAX = 1500.0

CSV_HEADER = "timestamp_utc,ghi_wm2,dhi_wm2,temp_c"


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime  # aware, UTC
    ghi_wm2: float
    dhi_wm2: float
    temp_c: float


def _year_bounds_epoch(year: int) -> tuple[int, int]:
    start = datetime(year, 1, 1, tzinfo=timezone.utc)
    end = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
    return int(start.timestamp()), int(end.timestamp())


class WeatherSeries:
    """A validated fixed-step series covering one calendar year.

    Internally array-backed (epoch seconds + float columns); iterate records
    via :meth:`records` when object access is more convenient.
    """

    __slots__ = ("epochs", "ghi", "dhi", "temp", "step_seconds", "year")

    def __init__(self, epochs, ghi, dhi, temp):
        self.epochs = np.asarray(epochs, dtype=np.int64)
        self.ghi = np.asarray(ghi, dtype=np.float64)
        self.dhi = np.asarray(dhi, dtype=np.float64)
        self.temp = np.asarray(temp, dtype=np.float64)
        n = len(self.epochs)
        if not (len(self.ghi) == len(self.dhi) == len(self.temp) == n):
            raise FormatError("weather columns have mismatched lengths")
        if n < 2:
            raise FormatError("weather series needs at least two records")
        steps = np.diff(self.epochs)
        if steps.min() <= 0:
            bad = int(np.argmax(steps <= 0))
            raise FormatError(f"timestamps not strictly increasing at record {bad + 2}")
        if steps.max() != steps.min():
            bad = int(np.argmax(steps != steps[0]))
            raise FormatError(f"non-uniform step at record {bad + 2}")
        self.step_seconds = int(steps[0])
        first = datetime.fromtimestamp(int(self.epochs[0]), tz=timezone.utc)
        self.year = first.year
        y0, y1 = _year_bounds_epoch(self.year)
        if int(self.epochs[0]) != y0 or int(self.epochs[-1]) + self.step_seconds != y1:
            raise FormatError(
                f"series must cover calendar year {self.year} exactly "
                f"(starts {first.isoformat()}, {n} records at {self.step_seconds} s)"
            )
        if not (np.isfinite(self.ghi).all() and np.isfinite(self.dhi).all() and np.isfinite(self.temp).all()):
            raise FormatError("non-finite weather value")
        bad = np.flatnonzero((self.dhi < 0) | (self.dhi > self.ghi) | (self.ghi > GHI_MAX))
        if bad.size:
            i = int(bad[0])
            raise FormatError(
                f"record {i + 1}: need 0 <= dhi <= ghi <= {GHI_MAX:g} "
                f"(ghi={self.ghi[i]!r}, dhi={self.dhi[i]!r})"
            )

    def __len__(self) -> int:
        return len(self.epochs)

    def records(self):
        for i in range(len(self.epochs)):
            yield WeatherRecord(
                datetime.fromtimestamp(int(self.epochs[i]), tz=timezone.utc),
                float(self.ghi[i]),
                float(self.dhi[i]),
                float(self.temp[i]),
            )

    def annual_ghi_kwh_m2(self) -> float:
        return float(self.ghi.sum() * (self.step_seconds / 3600.0) / 1000.0)


def format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> int:
    """RFC-3339 to epoch seconds; accepts 'Z' or an explicit offset."""
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as e:
        raise FormatError(f"bad timestamp {text!r}: {e}") from None
    if dt.tzinfo is None:
        raise FormatError(f"timestamp {text!r} lacks a UTC offset")
    return int(dt.timestamp())


def dump_weather_csv(series: WeatherSeries, path) -> None:
    lines = [CSV_HEADER]
    for i in range(len(series)):
        lines.append(
            f"{format_timestamp(series.epochs[i])},"
            f"{float(series.ghi[i])!r},{float(series.dhi[i])!r},"
            f"{float(series.temp[i])!r}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weather_csv(path) -> WeatherSeries:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(f"{path}: expected header {CSV_HEADER!r}")
    epochs, ghi, dhi, temp = [], [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{ln}: expected 4 fields, got {len(parts)}")
        try:
            epochs.append(parse_timestamp(parts[0]))
            ghi.append(float(parts[1]))
            dhi.append(float(parts[2]))
            temp.append(float(parts[3]))
        except FormatError:
            raise
        except ValueError as e:
            raise FormatError(f"{path}:{ln}: {e}") from None
    try:
        return WeatherSeries(epochs, ghi, dhi, temp)
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def make_series(year: int, step_seconds: int, ghi, dhi, temp) -> WeatherSeries:
    """Build a validated series for `year` from column arrays."""
    y0, y1 = _year_bounds_epoch(year)
    n = (y1 - y0) // step_seconds
    if n * step_seconds != y1 - y0:
        raise FormatError(f"step {step_seconds} s does not divide year {year}")
    epochs = y0 + step_seconds * np.arange(n, dtype=np.int64)
    return WeatherSeries(epochs, ghi, dhi, temp)


def hours_in_year(year: int) -> int:
    y0, y1 = _year_bounds_epoch(year)
    return (y1 - y0) // 3600
