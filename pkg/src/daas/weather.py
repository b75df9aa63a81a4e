"""Per-station hourly weather: actuals, historical forecasts, forecast-error
statistics, the certainty-margin adjustment and a synthetic generator.

Values are held in dense arrays indexed ``[station, hour, attribute]`` (and
``[station, hour, lead - 1, attribute]`` for forecasts) so planners can take
whole-network snapshots cheaply. ``WeatherRecord`` is the row-level view.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.signal import lfilter

from .errors import DataError, MissingWeatherError, ParseError
from .network import read_csv_table
from .timeutil import HOUR_S, epoch_hour, format_ts, parse_ts

ATTRIBUTES = (
    "temperature_c",
    "cloud_cover",
    "wind_speed_ms",
    "wind_bearing",
    "humidity",
    "pressure_hpa",
    "dew_point_c",
    "visibility_km",
)
IDX = {a: i for i, a in enumerate(ATTRIBUTES)}
N_ATTR = len(ATTRIBUTES)
MAX_LEAD = 24

ACTUAL_COLUMNS = ["station", "timestamp_iso8601", *ATTRIBUTES]
FORECAST_COLUMNS = [*ACTUAL_COLUMNS, "lead_hours"]


@dataclass(frozen=True)
class WeatherRecord:
    station: str
    timestamp: float
    temperature_c: float
    cloud_cover: float
    wind_speed_ms: float
    wind_bearing: float
    humidity: float
    pressure_hpa: float
    dew_point_c: float
    visibility_km: float

    def values(self) -> np.ndarray:
        return np.array([getattr(self, a) for a in ATTRIBUTES], dtype=float)

    @classmethod
    def from_values(cls, station: str, timestamp: float, values) -> "WeatherRecord":
        return cls(station, float(timestamp), *(float(v) for v in values))

    def problems(self) -> list[str]:
        out = []
        for a in ("cloud_cover", "humidity"):
            if not 0.0 <= getattr(self, a) <= 1.0:
                out.append(f"{a}={getattr(self, a)} outside [0, 1]")
        for a in ("wind_speed_ms", "visibility_km"):
            if getattr(self, a) < 0:
                out.append(f"{a}={getattr(self, a)} negative")
        if not all(math.isfinite(getattr(self, a)) for a in ATTRIBUTES):
            out.append("non-finite value")
        return out


def clamp_values(values: np.ndarray) -> np.ndarray:
    """Project an attribute array (last axis = ATTRIBUTES) onto the valid ranges."""
    v = np.array(values, dtype=float, copy=True)
    for a in ("cloud_cover", "humidity"):
        v[..., IDX[a]] = np.clip(v[..., IDX[a]], 0.0, 1.0)
    for a in ("wind_speed_ms", "visibility_km"):
        v[..., IDX[a]] = np.maximum(v[..., IDX[a]], 0.0)
    v[..., IDX["wind_bearing"]] = np.mod(v[..., IDX["wind_bearing"]], 360.0)
    return v


def attribute_error(forecast: np.ndarray, actual: np.ndarray) -> np.ndarray:
    """forecast - actual, with the bearing difference wrapped into [-180, 180)."""
    err = np.asarray(forecast, dtype=float) - np.asarray(actual, dtype=float)
    b = IDX["wind_bearing"]
    err[..., b] = np.mod(err[..., b] + 180.0, 360.0) - 180.0
    return err


@dataclass(frozen=True)
class TimeRange:
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise DataError(f"empty time range {format_ts(self.start)} .. {format_ts(self.end)}")

    @classmethod
    def parse(cls, start, end) -> "TimeRange":
        return cls(parse_ts(start), parse_ts(end))

    def epoch_hours(self) -> np.ndarray:
        first = math.ceil(self.start / HOUR_S)
        last = math.ceil(self.end / HOUR_S)
        return np.arange(first, last, dtype=np.int64)

    @property
    def hours(self) -> float:
        return (self.end - self.start) / HOUR_S


@dataclass
class ForecastSeries:
    station: str
    timestamp: float
    forecasts: dict[int, WeatherRecord]
    actual: WeatherRecord

    def __post_init__(self):
        if len(self.forecasts) > MAX_LEAD:
            raise DataError(f"{len(self.forecasts)} forecast leads for one target, at most {MAX_LEAD}")


class WeatherStore:
    """Write-once hourly weather for a set of stations."""

    def __init__(self, stations, hours, actual, forecast=None):
        self.stations = list(stations)
        self.station_index = {s: i for i, s in enumerate(self.stations)}
        self.hours = np.asarray(hours, dtype=np.int64)
        if np.any(np.diff(self.hours) <= 0):
            raise DataError("weather hours must be strictly increasing")
        self.hour_pos = {int(h): i for i, h in enumerate(self.hours)}
        self.actual = np.asarray(actual, dtype=float)
        self.forecast = None if forecast is None else np.asarray(forecast, dtype=float)
        if self.actual.shape != (len(self.stations), len(self.hours), N_ATTR):
            raise DataError(f"actual array has shape {self.actual.shape}")
        if self.forecast is not None and self.forecast.shape != (len(self.stations), len(self.hours), MAX_LEAD, N_ATTR):
            raise DataError(f"forecast array has shape {self.forecast.shape}")

    @property
    def n_actual(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.actual[..., 0])))

    @property
    def n_forecast(self) -> int:
        if self.forecast is None:
            return 0
        return int(np.count_nonzero(~np.isnan(self.forecast[..., 0])))

    def covers(self, seconds: float) -> bool:
        return epoch_hour(seconds) in self.hour_pos

    def hour_index(self, seconds: float) -> int:
        try:
            return self.hour_pos[epoch_hour(seconds)]
        except KeyError:
            raise MissingWeatherError(f"no weather for hour {format_ts(epoch_hour(seconds) * HOUR_S)}") from None

    def _station(self, station: str) -> int:
        try:
            return self.station_index[station]
        except KeyError:
            raise MissingWeatherError(f"no weather for station {station!r}") from None

    def actual_record(self, station: str, seconds: float) -> WeatherRecord:
        s, h = self._station(station), self.hour_index(seconds)
        vals = self.actual[s, h]
        if np.isnan(vals).any():
            raise MissingWeatherError(f"no actual weather for {station} at {format_ts(seconds)}")
        return WeatherRecord.from_values(station, float(self.hours[h] * HOUR_S), vals)

    def forecast_record(self, station: str, seconds: float, lead: int) -> WeatherRecord:
        if not 1 <= lead <= MAX_LEAD:
            raise DataError(f"lead {lead} outside 1..{MAX_LEAD}")
        if self.forecast is None:
            raise MissingWeatherError("store holds no forecasts")
        s, h = self._station(station), self.hour_index(seconds)
        vals = self.forecast[s, h, lead - 1]
        if np.isnan(vals).any():
            raise MissingWeatherError(f"no {lead}h forecast for {station} at {format_ts(seconds)}")
        return WeatherRecord.from_values(station, float(self.hours[h] * HOUR_S), vals)

    def snapshot(self, seconds: float, lead: int | None = None) -> np.ndarray:
        """All stations' values at one hour: the ``lead``-hour forecast when
        available, otherwise the actual measurement. Shape (stations, attributes)."""
        h = self.hour_index(seconds)
        if lead is not None and self.forecast is not None:
            lead = min(max(int(lead), 1), MAX_LEAD)
            vals = self.forecast[:, h, lead - 1]
            if not np.isnan(vals).any():
                return vals
        vals = self.actual[:, h]
        if np.isnan(vals).any():
            missing = [self.stations[i] for i in np.flatnonzero(np.isnan(vals).any(axis=1))]
            raise MissingWeatherError(f"no weather at {format_ts(seconds)} for {missing[:5]}")
        return vals

    def series(self) -> Iterator[ForecastSeries]:
        if self.forecast is None:
            return
        for s, station in enumerate(self.stations):
            for h, hour in enumerate(self.hours):
                if np.isnan(self.actual[s, h, 0]):
                    continue
                t = float(hour * HOUR_S)
                fc = {
                    lead: WeatherRecord.from_values(station, t, self.forecast[s, h, lead - 1])
                    for lead in range(1, MAX_LEAD + 1)
                    if not np.isnan(self.forecast[s, h, lead - 1, 0])
                }
                if fc:
                    yield ForecastSeries(station, t, fc, WeatherRecord.from_values(station, t, self.actual[s, h]))

    def to_csv(self, actual_path, forecast_path=None, header_comment: str | None = None):
        with open(actual_path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ACTUAL_COLUMNS)
            for s, station in enumerate(self.stations):
                for h, hour in enumerate(self.hours):
                    vals = self.actual[s, h]
                    if np.isnan(vals[0]):
                        continue
                    w.writerow([station, format_ts(hour * HOUR_S), *map(repr, vals.tolist())])
        if forecast_path is None or self.forecast is None:
            return
        with open(forecast_path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FORECAST_COLUMNS)
            for s, station in enumerate(self.stations):
                for h, hour in enumerate(self.hours):
                    ts = format_ts(hour * HOUR_S)
                    for lead in range(1, MAX_LEAD + 1):
                        vals = self.forecast[s, h, lead - 1]
                        if np.isnan(vals[0]):
                            continue
                        w.writerow([station, ts, *map(repr, vals.tolist()), lead])

    @classmethod
    def from_csv(cls, actual_path, forecast_path=None) -> "WeatherStore":
        rows = read_csv_table(actual_path, ACTUAL_COLUMNS)
        parsed = []
        for lineno, row in rows:
            try:
                rec = WeatherRecord(row["station"], parse_ts(row["timestamp_iso8601"]),
                                    *(float(row[a]) for a in ATTRIBUTES))
            except ValueError as exc:
                raise ParseError(actual_path, lineno, str(exc)) from None
            bad = rec.problems()
            if bad:
                raise ParseError(actual_path, lineno, "; ".join(bad))
            parsed.append(rec)
        stations = list(dict.fromkeys(r.station for r in parsed))
        hours = sorted({epoch_hour(r.timestamp) for r in parsed})
        fc_rows = []
        if forecast_path is not None:
            for lineno, row in read_csv_table(forecast_path, FORECAST_COLUMNS):
                try:
                    lead = int(row["lead_hours"])
                    rec = WeatherRecord(row["station"], parse_ts(row["timestamp_iso8601"]),
                                        *(float(row[a]) for a in ATTRIBUTES))
                except ValueError as exc:
                    raise ParseError(forecast_path, lineno, str(exc)) from None
                if not 1 <= lead <= MAX_LEAD:
                    raise ParseError(forecast_path, lineno, f"lead_hours {lead} outside 1..{MAX_LEAD}")
                fc_rows.append((lineno, lead, rec))
            for _, _, rec in fc_rows:
                if rec.station not in stations:
                    stations.append(rec.station)
            hours = sorted(set(hours) | {epoch_hour(r.timestamp) for _, _, r in fc_rows})
        s_idx = {s: i for i, s in enumerate(stations)}
        h_idx = {h: i for i, h in enumerate(hours)}
        actual = np.full((len(stations), len(hours), N_ATTR), np.nan)
        for r in parsed:
            actual[s_idx[r.station], h_idx[epoch_hour(r.timestamp)]] = r.values()
        forecast = None
        if forecast_path is not None:
            forecast = np.full((len(stations), len(hours), MAX_LEAD, N_ATTR), np.nan)
            for _, lead, r in fc_rows:
                forecast[s_idx[r.station], h_idx[epoch_hour(r.timestamp)], lead - 1] = r.values()
        return cls(stations, hours, actual, forecast)


@dataclass
class DeviationStats:
    """Forecast-minus-actual error moments per (station, attribute)."""

    stations: list[str]
    mean: np.ndarray
    std: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        self.station_index = {s: i for i, s in enumerate(self.stations)}

    def get(self, station: str, attribute: str) -> tuple[float, float, int]:
        s = self.station_index[station]
        a = IDX[attribute]
        return float(self.mean[s, a]), float(self.std[s, a]), int(self.n[s, a])

    def sigma(self, station: str) -> np.ndarray:
        try:
            return self.std[self.station_index[station]]
        except KeyError:
            raise MissingWeatherError(f"no deviation statistics for station {station!r}") from None

    def sigma_table(self, stations) -> np.ndarray:
        """Sigma rows aligned to ``stations`` (e.g. a network's station order)."""
        missing = [s for s in stations if s not in self.station_index]
        if missing:
            raise MissingWeatherError(f"no deviation statistics for stations {missing[:5]}")
        return self.std[[self.station_index[s] for s in stations]]

    def to_json(self) -> str:
        doc = {
            "attributes": list(ATTRIBUTES),
            "stations": {
                s: {
                    a: {"mean_error": float(self.mean[i, j]), "std_error": float(self.std[i, j]), "n": int(self.n[i, j])}
                    for j, a in enumerate(ATTRIBUTES)
                }
                for i, s in enumerate(self.stations)
            },
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DeviationStats":
        doc = json.loads(text)
        stations = list(doc["stations"])
        shape = (len(stations), N_ATTR)
        mean, std, n = np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=np.int64)
        for i, s in enumerate(stations):
            for a, cell in doc["stations"][s].items():
                j = IDX[a]
                mean[i, j], std[i, j], n[i, j] = cell["mean_error"], cell["std_error"], cell["n"]
        return cls(stations, mean, std, n)


def compute_deviation_stats(series: Iterable[ForecastSeries]) -> DeviationStats:
    """Pool (forecast - actual) over every lead and timestamp per station and
    report the mean and population standard deviation per attribute."""
    sums: dict[str, list] = {}
    for fs in series:
        if not fs.forecasts:
            raise DataError(f"series for {fs.station} at {format_ts(fs.timestamp)} has no forecasts")
        actual = fs.actual.values()
        errs = attribute_error(np.array([r.values() for r in fs.forecasts.values()]), actual)
        acc = sums.setdefault(fs.station, [])
        acc.append(errs)
    if not sums:
        raise DataError("no forecast series to summarise")
    stations = list(sums)
    mean = np.zeros((len(stations), N_ATTR))
    std = np.zeros_like(mean)
    n = np.zeros((len(stations), N_ATTR), dtype=np.int64)
    for i, s in enumerate(stations):
        errs = np.concatenate(sums[s], axis=0)
        mean[i] = errs.mean(axis=0)
        std[i] = errs.std(axis=0)
        n[i] = len(errs)
    return DeviationStats(stations, mean, std, n)


def deviation_stats_from_store(store: WeatherStore) -> DeviationStats:
    """Array-at-once equivalent of ``compute_deviation_stats(store.series())``."""
    if store.forecast is None:
        raise DataError("store holds no forecasts")
    err = attribute_error(store.forecast, store.actual[:, :, None, :])
    valid = ~np.isnan(err[..., 0])
    stations, means, stds, ns = [], [], [], []
    for s, station in enumerate(store.stations):
        e = err[s][valid[s]]
        if len(e) == 0:
            continue
        stations.append(station)
        means.append(e.mean(axis=0))
        stds.append(e.std(axis=0))
        ns.append(np.full(N_ATTR, len(e), dtype=np.int64))
    if not stations:
        raise DataError("no paired forecasts in store")
    return DeviationStats(stations, np.array(means), np.array(stds), np.array(ns))


def per_lead_profile(store: WeatherStore) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pooled over stations: (mean, std, n) of the error per lead hour, shape (24, attributes)."""
    if store.forecast is None:
        raise DataError("store holds no forecasts")
    err = attribute_error(store.forecast, store.actual[:, :, None, :])
    mean = np.zeros((MAX_LEAD, N_ATTR))
    std = np.zeros_like(mean)
    n = np.zeros(MAX_LEAD, dtype=np.int64)
    for lead in range(MAX_LEAD):
        e = err[:, :, lead].reshape(-1, N_ATTR)
        e = e[~np.isnan(e[:, 0])]
        n[lead] = len(e)
        if len(e):
            mean[lead] = e.mean(axis=0)
            std[lead] = e.std(axis=0)
    return mean, std, n


TOWARD_LIMIT = "limit"
# safety-pessimistic directions: forecasts that run high are reduced and vice versa
DEFAULT_SIGNS: Mapping[str, object] = {
    "temperature_c": TOWARD_LIMIT,
    "cloud_cover": 0,
    "wind_speed_ms": +1,
    "wind_bearing": 0,
    "humidity": 0,
    "pressure_hpa": 0,
    "dew_point_c": +1,
    "visibility_km": -1,
}
# the literal pseudo-code reading: V + CM, DP - CM, T + CM, WS + CM
LITERAL_SIGNS: Mapping[str, object] = {**DEFAULT_SIGNS, "temperature_c": +1, "dew_point_c": -1, "visibility_km": +1}
SWEEP_VALUES = (0, 1, 2, 3, 4, 5, 10, 15, 20)


@dataclass(frozen=True)
class CertaintyMargin:
    k: float = 2.0
    signs: Mapping[str, object] = field(default_factory=lambda: dict(DEFAULT_SIGNS))

    def __post_init__(self):
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ValueError(f"margin multiplier must be non-negative, got {self.k}")
        unknown = set(self.signs) - set(ATTRIBUTES)
        if unknown:
            raise ValueError(f"unknown attributes in margin signs: {sorted(unknown)}")
        for a, s in self.signs.items():
            if s not in (-1, 0, 1, TOWARD_LIMIT):
                raise ValueError(f"sign for {a} must be -1, 0, +1 or {TOWARD_LIMIT!r}")

    def sign_of(self, attribute: str):
        return self.signs.get(attribute, 0)

    def describe(self) -> dict:
        return {"k": self.k, "signs": {a: self.sign_of(a) for a in ATTRIBUTES}}


def adjust_arrays(values: np.ndarray, sigma: np.ndarray, cm: CertaintyMargin,
                  temp_limits: tuple[float, float] = (-20.0, 45.0)) -> np.ndarray:
    """value + sign * k * sigma per attribute, then clamped. Last axis = ATTRIBUTES."""
    values = np.asarray(values, dtype=float)
    if cm.k == 0:
        return clamp_values(values)
    out = values.copy()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), values.shape)
    for a in ATTRIBUTES:
        i = IDX[a]
        sign = cm.sign_of(a)
        if sign == 0:
            continue
        if sign == TOWARD_LIMIT:
            mid = 0.5 * (temp_limits[0] + temp_limits[1])
            sign = np.where(values[..., i] >= mid, 1.0, -1.0)
        out[..., i] = values[..., i] + sign * cm.k * sigma[..., i]
    return clamp_values(out)


def adjust_with_cm(record: WeatherRecord, stats: DeviationStats, cm: CertaintyMargin,
                   temp_limits: tuple[float, float] = (-20.0, 45.0)) -> WeatherRecord:
    sigma = stats.sigma(record.station)
    vals = adjust_arrays(record.values(), sigma, cm, temp_limits)
    return WeatherRecord.from_values(record.station, record.timestamp, vals)


def average_records(values_a: np.ndarray, values_b: np.ndarray) -> np.ndarray:
    """Midpoint weather of two stations; bearings use the circular mean."""
    out = 0.5 * (np.asarray(values_a, dtype=float) + np.asarray(values_b, dtype=float))
    b = IDX["wind_bearing"]
    ra, rb = np.radians(values_a[..., b]), np.radians(values_b[..., b])
    out[..., b] = np.mod(np.degrees(np.arctan2(np.sin(ra) + np.sin(rb), np.cos(ra) + np.cos(rb))), 360.0)
    return out


# (bias, sigma) per attribute; sigma is the 24 h-lead spread
DEFAULT_ERROR_MODEL: Mapping[str, tuple[float, float]] = {
    "temperature_c": (0.5, 1.2),
    "cloud_cover": (0.0, 0.06),
    "wind_speed_ms": (0.6, 0.9),
    "wind_bearing": (0.0, 15.0),
    "humidity": (0.0, 0.04),
    "pressure_hpa": (0.0, 1.0),
    "dew_point_c": (-0.7, 1.0),
    "visibility_km": (1.2, 1.0),
}
ZERO_ERROR_MODEL = {a: (0.0, 0.0) for a in ATTRIBUTES}


def load_error_model(path) -> dict[str, tuple[float, float]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file {path}")
    doc = json.loads(path.read_text())
    return parse_error_model(doc)


def parse_error_model(doc: Mapping) -> dict[str, tuple[float, float]]:
    model = dict(ZERO_ERROR_MODEL)
    for a, cell in doc.items():
        if a not in IDX:
            raise DataError(f"error model names unknown attribute {a!r}")
        bias, sigma = float(cell["bias"]), float(cell["sigma"])
        if sigma < 0:
            raise DataError(f"error model sigma for {a} is negative")
        model[a] = (bias, sigma)
    return model


def _ar1(rng: np.random.Generator, shape, phi: float = 0.92) -> np.ndarray:
    """Unit-variance AR(1) noise along the last axis."""
    white = rng.standard_normal(shape) * math.sqrt(1 - phi * phi)
    white[..., 0] = rng.standard_normal(shape[:-1])
    return lfilter([1.0], [1.0, -phi], white, axis=-1)


def _dew_point_humidity(temp_c, dew_c):
    """Relative humidity from temperature and dew point (Magnus form)."""
    a, b = 17.625, 243.04
    return np.exp(a * dew_c / (b + dew_c) - a * temp_c / (b + temp_c))


def generate_weather(stations, time_ranges, error_model: Mapping | None = None, seed: int = 0) -> WeatherStore:
    """Synthetic actuals plus 1..24 h forecasts for every station-hour.

    ``stations`` is a network or an iterable of ``(id, lat, lon)``. Actuals are
    seasonal and diurnal sinusoids driven by a regional AR(1) component shared
    by all stations plus a local one per station. Each forecast is
    ``actual + bias + N(0, sigma * sqrt(lead / 24))``.
    """
    if hasattr(stations, "stations"):
        rows = [(s.id, s.location.lat, s.location.lon) for s in stations.stations.values()]
    else:
        rows = [tuple(r) for r in stations]
    if not rows:
        raise DataError("no stations to generate weather for")
    model = dict(ZERO_ERROR_MODEL)
    model.update(DEFAULT_ERROR_MODEL if error_model is None else error_model)
    for a, (_, sigma) in model.items():
        if sigma < 0:
            raise DataError(f"error model sigma for {a} is negative")
    ranges = [r if isinstance(r, TimeRange) else TimeRange.parse(*r) for r in time_ranges]
    if not ranges:
        raise DataError("no time ranges")
    hours = np.unique(np.concatenate([r.epoch_hours() for r in ranges]))
    if len(hours) == 0:
        raise DataError("time ranges contain no whole hour")

    rng = np.random.default_rng(seed)
    ids = [r[0] for r in rows]
    lat = np.array([r[1] for r in rows])[:, None]
    lon = np.array([r[2] for r in rows])[:, None]
    S, H = len(rows), len(hours)
    t = hours.astype(float)[None, :] * HOUR_S
    doy = (t / 86400.0) % 365.2425
    seasonal = np.cos(2 * np.pi * (doy - 15.0) / 365.2425)
    solar_hour = (t / HOUR_S + lon / 15.0) % 24
    diurnal = np.cos(2 * np.pi * (solar_hour - 15.0) / 24.0)
    # noise spans the contiguous hour axis; gaps between ranges just continue the process
    regional = _ar1(rng, (N_ATTR, 1, H))
    local = _ar1(rng, (N_ATTR, S, H))
    lat_c = lat - lat.mean()

    temp = 15.0 + 4.5 * seasonal + 5.0 * diurnal - 3.0 * lat_c + 2.0 * regional[0] + 1.0 * local[0]
    spread = np.maximum(6.5 + 2.5 * diurnal + 1.5 * regional[6] + 0.8 * local[6], 0.3)
    dew = temp - spread
    hum = np.clip(_dew_point_humidity(temp, dew), 0.0, 1.0)
    cloud = 1.0 / (1.0 + np.exp(-(-1.6 + 0.7 * regional[1] + 1.0 * local[1])))
    wind = np.maximum(4.5 + 1.5 * diurnal + 1.8 * regional[2] + 0.9 * local[2], 0.0)
    bearing = np.mod(290.0 + 40.0 * regional[3] + 15.0 * local[3], 360.0)
    pressure = 1015.0 + 6.0 * regional[5] + 1.0 * local[5]
    vis = np.clip(11.0 + 1.5 * regional[7] + 1.0 * local[7] - 15.0 * np.maximum(hum - 0.75, 0.0), 0.5, 16.0)

    actual = np.stack([temp, cloud, wind, bearing, hum, pressure, dew, vis], axis=-1)
    actual = clamp_values(np.round(clamp_values(actual), 3))

    bias = np.array([model[a][0] for a in ATTRIBUTES])
    sigma = np.array([model[a][1] for a in ATTRIBUTES])
    lead_scale = np.sqrt(np.arange(1, MAX_LEAD + 1) / MAX_LEAD)[:, None]
    noise = rng.standard_normal((S, H, MAX_LEAD, N_ATTR))
    forecast = actual[:, :, None, :] + bias + noise * (sigma * lead_scale)
    if not np.any(sigma) and not np.any(bias):
        forecast = np.broadcast_to(actual[:, :, None, :], forecast.shape).copy()
    forecast = clamp_values(np.round(clamp_values(forecast), 3))
    return WeatherStore(ids, hours, actual, forecast)
