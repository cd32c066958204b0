"""
Ingestion of long-format station readings.

CSV schema: ``station_id,timestamp,species,value`` with ISO-8601 UTC timestamps
and an empty value cell for a missing reading. Optional station metadata comes
from a second CSV ``station_id,name,latitude,longitude``.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from airsindy.core.errors import (
    DatasetError,
    DuplicateReadingError,
    MalformedRowError,
    MissingDataError,
    NonUniformStepError,
    SpeciesMissingError,
    WindowError,
)

DEFAULT_SCHEMA = {
    'station_id': 'station_id',
    'timestamp': 'timestamp',
    'species': 'species',
    'value': 'value',
}

STATION_COLUMNS = ('station_id', 'name', 'latitude', 'longitude')


def to_utc(ts):
    """Parses a timestamp-like value into a tz-aware UTC pandas Timestamp."""
    ts = pd.Timestamp(ts)
    if ts.tzinfo is None:
        return ts.tz_localize('UTC')
    return ts.tz_convert('UTC')


@dataclass(frozen=True)
class StationInfo:
    station_id: str
    name: str = ''
    latitude: float = math.nan
    longitude: float = math.nan


@dataclass(frozen=True, eq=False)
class RawSeries:
    """Uniformly sampled readings of one species at one station (µg/m³).

    Missing readings are stored as NaN.
    """
    station: str
    species: str
    t0: pd.Timestamp
    dt_hours: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DatasetError(f"series {self.station}/{self.species} has no values")
        if not self.dt_hours > 0:
            raise DatasetError(f"series {self.station}/{self.species} has non-positive step {self.dt_hours}")
        if np.isinf(values).any():
            raise DatasetError(f"series {self.station}/{self.species} has non-finite values")
        if not self.species:
            raise DatasetError("species identifier must be non-empty")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 't0', to_utc(self.t0))

    def __len__(self):
        return self.values.size

    @property
    def missing(self):
        return np.isnan(self.values)

    def timestamps(self):
        return self.t0 + pd.to_timedelta(np.arange(len(self)) * self.dt_hours, unit='h')

    def hours(self):
        """Sample times in hours relative to t0."""
        return np.arange(len(self)) * self.dt_hours

    def same_as(self, other):
        return (
            self.station == other.station
            and self.species == other.species
            and self.t0 == other.t0
            and self.dt_hours == other.dt_hours
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class TimeWindow:
    start: pd.Timestamp
    end: pd.Timestamp

    def __post_init__(self):
        start, end = to_utc(self.start), to_utc(self.end)
        if not start < end:
            raise WindowError(f"window start {start.isoformat()} must precede end {end.isoformat()}")
        object.__setattr__(self, 'start', start)
        object.__setattr__(self, 'end', end)

    @property
    def hours(self):
        return (self.end - self.start) / pd.Timedelta(hours=1)

    def __str__(self):
        return f"[{self.start.isoformat()}, {self.end.isoformat()}]"


@dataclass(frozen=True, eq=False)
class StationDataset:
    """Immutable collection of RawSeries keyed by (station, species)."""
    series: Mapping = field(default_factory=dict)
    stations: Mapping = field(default_factory=dict)

    def __post_init__(self):
        grids = {}
        for (station, species), s in self.series.items():
            if (s.station, s.species) != (station, species):
                raise DatasetError(f"series key ({station}, {species}) does not match its content")
            grid = (s.t0, s.dt_hours)
            if grids.setdefault(station, grid) != grid:
                raise DatasetError(f"series at station {station} do not share t0 and dt")
        object.__setattr__(self, 'series', dict(self.series))
        object.__setattr__(self, 'stations', dict(self.stations))

    @property
    def station_ids(self):
        return sorted({station for station, _ in self.series})

    def species_at(self, station):
        return sorted(species for st, species in self.series if st == station)

    def get(self, station, species):
        try:
            return self.series[(station, species)]
        except KeyError:
            raise SpeciesMissingError(station, species) from None

    def equals(self, other):
        if set(self.series) != set(other.series):
            return False
        return all(self.series[k].same_as(other.series[k]) for k in self.series)


# --- Loading ---

def _read_text_table(path, required):
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as e:
        raise DatasetError(f"file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetError(f"could not parse {path}: {e}") from e
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise DatasetError(f"{path} is missing columns {missing}; header has {list(df.columns)}")
    return df


def _parse_value(text):
    text = text.strip()
    if text == '':
        return math.nan
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def load_station_metadata(path):
    """Reads ``station_id,name,latitude,longitude`` into StationInfo records."""
    df = _read_text_table(path, STATION_COLUMNS)
    stations = {}
    for i, row in enumerate(df.itertuples(index=False), start=2):
        try:
            info = StationInfo(
                station_id=row.station_id.strip(),
                name=row.name.strip(),
                latitude=float(row.latitude) if row.latitude.strip() else math.nan,
                longitude=float(row.longitude) if row.longitude.strip() else math.nan,
            )
        except ValueError as e:
            raise MalformedRowError(i, str(e)) from e
        if not info.station_id:
            raise MalformedRowError(i, "empty station_id")
        stations[info.station_id] = info
    logging.info(f"Loaded metadata for {len(stations)} stations from {path}")
    return stations


def load_csv(path, schema=None, stations_path=None):
    """
    Loads a long-format readings CSV into a StationDataset.

    Args:
        path: CSV file with a header row.
        schema: optional mapping from the canonical column names
            (station_id, timestamp, species, value) to the file's names.
        stations_path: optional station metadata CSV.

    Returns:
        StationDataset with one RawSeries per (station, species).
    """
    cols = dict(DEFAULT_SCHEMA)
    cols.update(schema or {})
    df = _read_text_table(path, list(cols.values()))
    df = df.rename(columns={v: k for k, v in cols.items()})[list(DEFAULT_SCHEMA)]
    df['line'] = np.arange(len(df)) + 2  # header is line 1

    df['station_id'] = df['station_id'].str.strip()
    df['species'] = df['species'].str.strip()
    for name in ('station_id', 'species'):
        empty = df[name] == ''
        if empty.any():
            raise MalformedRowError(int(df.loc[empty, 'line'].iloc[0]), f"empty {name}")

    stamps = pd.to_datetime(df['timestamp'].str.strip(), utc=True, errors='coerce', format='ISO8601')
    if stamps.isna().any():
        bad = df.loc[stamps.isna()].iloc[0]
        raise MalformedRowError(int(bad['line']), f"timestamp {bad['timestamp']!r} is not ISO-8601")
    df['timestamp'] = stamps

    values = np.empty(len(df))
    for i, (text, line) in enumerate(zip(df['value'], df['line'])):
        try:
            values[i] = _parse_value(text)
        except ValueError as e:
            raise MalformedRowError(int(line), f"bad value {text!r}") from e
    df['value'] = values

    dup = df.duplicated(subset=['station_id', 'species', 'timestamp'], keep='first')
    if dup.any():
        row = df.loc[dup].iloc[0]
        raise DuplicateReadingError(
            f"line {row['line']}: duplicate reading for {row['station_id']}/{row['species']} "
            f"at {row['timestamp'].isoformat()}"
        )

    df = df.sort_values(['station_id', 'timestamp', 'species'], kind='mergesort')
    series = {}
    for station, rows in df.groupby('station_id', sort=True):
        grid = pd.DatetimeIndex(rows['timestamp'].drop_duplicates().sort_values())
        dt_hours = _uniform_step(station, grid)
        for species, sp_rows in rows.groupby('species', sort=True):
            aligned = pd.Series(sp_rows['value'].to_numpy(), index=pd.DatetimeIndex(sp_rows['timestamp']))
            aligned = aligned.reindex(grid)
            series[(station, species)] = RawSeries(station, species, grid[0], dt_hours, aligned.to_numpy())

    stations = load_station_metadata(stations_path) if stations_path else {}
    ds = StationDataset(series, stations)
    logging.info(f"Loaded {len(df)} rows from {path}: {len(ds.station_ids)} stations, {len(series)} series")
    return ds


def _uniform_step(station, grid):
    if len(grid) < 2:
        return 1.0
    steps = np.diff(grid.asi8)
    if not (steps == steps[0]).all():
        k = int(np.flatnonzero(steps != steps[0])[0])
        raise NonUniformStepError(
            f"station {station}: step between {grid[k].isoformat()} and {grid[k + 1].isoformat()} "
            f"differs from the leading step"
        )
    return pd.Timedelta(int(steps[0]), unit='ns') / pd.Timedelta(hours=1)


def write_csv(ds, path):
    """Writes the dataset in the documented long schema."""
    frames = []
    for (station, species), s in sorted(ds.series.items()):
        frames.append(pd.DataFrame({
            'station_id': station,
            'timestamp': [t.isoformat() for t in s.timestamps()],
            'species': species,
            'value': [repr(float(v)) if not math.isnan(v) else '' for v in s.values],
        }))
    out = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(DEFAULT_SCHEMA))
    out.to_csv(path, index=False)
    logging.info(f"Wrote {len(out)} readings to {path}")
    return path


# --- Windowing ---

def stations_with(ds, species):
    return [st for st in ds.station_ids if all((st, sp) in ds.series for sp in species)]


def window_indices(s, w):
    """Returns the index range of ``s`` covered by ``w`` (inclusive bounds)."""
    step = pd.Timedelta(hours=s.dt_hours)
    offset = (w.start - s.t0) / step
    span = (w.end - w.start) / step
    if not (float(offset).is_integer() and float(span).is_integer()):
        raise WindowError(f"window {w} does not align with the {s.dt_hours} h sampling grid of {s.station}")
    first, last = int(offset), int(offset + span)
    if first < 0 or last > len(s) - 1:
        raise WindowError(
            f"window {w} lies outside the data range of station {s.station} "
            f"[{s.t0.isoformat()}, {s.timestamps()[-1].isoformat()}]"
        )
    if last < first:
        raise WindowError(f"window {w} is empty")
    return first, last + 1


def select_window(ds, station, species: Sequence[str], w: TimeWindow):
    """Cuts aligned, complete sub-series of the requested species out of ``ds``."""
    out = []
    for sp in species:
        s = ds.get(station, sp)
        lo, hi = window_indices(s, w)
        values = s.values[lo:hi]
        gaps = np.flatnonzero(np.isnan(values))
        if gaps.size:
            raise MissingDataError(station, sp, s.t0 + pd.Timedelta(hours=(lo + gaps[0]) * s.dt_hours))
        out.append(RawSeries(station, sp, w.start, s.dt_hours, values.copy()))
    logging.debug(f"Selected window {w} at {station} for {list(species)}: M={len(out[0]) if out else 0}")
    return out


def dataset_from_frame(frame: pd.DataFrame, station: str, t0, dt_hours: float, stations: Optional[Mapping] = None):
    """Builds a one-station dataset from a frame whose columns are species."""
    series = {
        (station, sp): RawSeries(station, sp, t0, dt_hours, frame[sp].to_numpy(dtype=float))
        for sp in frame.columns
    }
    return StationDataset(series, stations or {})
