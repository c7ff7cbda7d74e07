"""Availability series: capacity-factor files and vessel berthing schedules."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_SERIES = DATA_DIR / "capacity_factors.csv"
FIRST_YEAR, LAST_YEAR = 2015, 2019
HOURS_PER_YEAR = 8760


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class AvailabilitySeries:
    name: str
    values: np.ndarray
    source: str = ""
    years: tuple[int, int] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise SeriesError(f"{self.name}: series must be one-dimensional")
        if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            bad = int(np.flatnonzero(~((v >= 0) & (v <= 1)))[0])
            raise SeriesError(f"{self.name}: value {v[bad]!r} at position {bad} outside [0, 1]")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def read_column(path: str | Path, column: str) -> tuple[np.ndarray, list[str]]:
    """All values of ``column`` plus the first column (timestamps)."""
    path = Path(path)
    if not path.is_file():
        raise SeriesError(f"series file not found: {path}")
    with path.open(newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        try:
            dialect = csv.Sniffer().sniff(sample, delimiters=",;\t")
        except csv.Error:
            dialect = csv.excel
        reader = csv.reader(fh, dialect)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SeriesError(f"{path}: empty file") from None
        if column not in header:
            raise SeriesError(f"{path}: no column {column!r} (have {', '.join(header)})")
        k = header.index(column)
        vals, stamps = [], []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals.append(float(row[k]))
            except (ValueError, IndexError):
                cell = row[k] if k < len(row) else ""
                raise SeriesError(f"{path}: row {rowno}: non-numeric value {cell!r} in column {column!r}") from None
            stamps.append(row[0])
    return np.array(vals), stamps


def load_series(path: str | Path, column: str, T: int | None = None, start: int = 0) -> AvailabilitySeries:
    """Load ``T`` values of ``column`` starting at row offset ``start``."""
    values, stamps = read_column(path, column)
    n = len(values) - start
    if T is None:
        T = n
    if n < T:
        raise SeriesError(f"series length {max(n, 0)} ≠ horizon {T}")
    chunk = values[start:start + T]
    bad = np.flatnonzero(~((chunk >= 0) & (chunk <= 1)))
    if bad.size:
        i = int(bad[0])
        raise SeriesError(f"{path}: row {start + i + 2}: value {chunk[i]!r} in column {column!r} outside [0, 1]")
    years = None
    try:
        years = (datetime.fromisoformat(stamps[start]).year, datetime.fromisoformat(stamps[start + T - 1]).year)
    except (ValueError, IndexError):
        pass
    return AvailabilitySeries(column, chunk, str(path), years)


def build_vessel_schedule(n_vessels: int, cycle_hours: int, load_window_hours: int, T: int) -> AvailabilitySeries:
    """Sum of staggered single-vessel berthing schedules.

    Vessel ``k`` is at berth during the first ``load_window_hours`` of each
    cycle, shifted by ``k * (cycle_hours // n_vessels)`` hours.
    """
    if n_vessels < 1 or cycle_hours < 1 or load_window_hours < 1 or T < 0:
        raise SeriesError("vessel schedule parameters must be positive")
    if n_vessels * load_window_hours > cycle_hours:
        raise SeriesError(f"{n_vessels} vessels with {load_window_hours} h windows cannot share a "
                          f"{cycle_hours} h cycle without overlapping")
    offset = cycle_hours // n_vessels
    if offset < load_window_hours:
        raise SeriesError(f"stagger of {offset} h is shorter than the {load_window_hours} h window; schedules overlap")
    t = np.arange(T)
    total = np.zeros(T)
    for k in range(n_vessels):
        total += ((t - k * offset) % cycle_hours) < load_window_hours
    return AvailabilitySeries("vessel_schedule", total, f"vessels={n_vessels} cycle={cycle_hours} window={load_window_hours}")


# -- synthetic reconstruction of the bundled capacity factors -------------------

SOLAR_MEAN = 0.246
WIND_MEAN = 0.500
LATITUDE = 28.0


def hourly_index(first_year: int = FIRST_YEAR, last_year: int = LAST_YEAR) -> list[datetime]:
    t0 = datetime(first_year, 1, 1)
    t1 = datetime(last_year + 1, 1, 1)
    n = int((t1 - t0).total_seconds() // 3600)
    return [t0 + timedelta(hours=h) for h in range(n)]


def _calibrate(raw_fn, target: float) -> np.ndarray:
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if raw_fn(mid).mean() < target:
            lo = mid
        else:
            hi = mid
    return raw_fn(0.5 * (lo + hi))


def _ar1(rng, n: int, phi: float) -> np.ndarray:
    shocks = rng.standard_normal(n) * math.sqrt(1 - phi * phi)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + shocks[i]
        out[i] = acc
    return out


def synthesize_capacity_factors(seed: int = 2016, first_year: int = FIRST_YEAR, last_year: int = LAST_YEAR):
    """Hourly solar and wind capacity factors for an inland desert site.

    Only summary statistics of the original series are public, so these are
    reconstructions: solar follows the sun's elevation under a slowly varying
    clearness index, wind passes an AR(1) speed process with diurnal and
    seasonal modulation through a generic turbine power curve.  Both are
    calibrated to the published long-run means.
    """
    rng = np.random.default_rng(seed)
    stamps = hourly_index(first_year, last_year)
    n = len(stamps)
    doy = np.array([s.timetuple().tm_yday for s in stamps], dtype=float)
    hour = np.array([s.hour for s in stamps], dtype=float) + 0.5

    lat = math.radians(LATITUDE)
    decl = np.radians(23.44) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    hour_angle = np.radians(15.0 * (hour - 12.0))
    sin_elev = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(hour_angle)
    clear = np.clip(sin_elev, 0.0, None) ** 1.15
    days = n // 24
    daily = _ar1(rng, days, 0.7)
    clearness = np.clip(0.86 + 0.08 * daily, 0.35, 1.0)
    clearness = np.repeat(clearness, 24)[:n] * (1 + 0.03 * rng.standard_normal(n))
    solar_raw = clear * np.clip(clearness, 0.0, 1.05)
    solar = _calibrate(lambda k: np.clip(k * solar_raw, 0.0, 1.0), SOLAR_MEAN)
    solar[sin_elev <= 0] = 0.0

    base = _ar1(rng, n, 0.985)
    years = np.array([s.year for s in stamps])
    for y in np.unique(years):
        # keep every calendar year on the same long-run statistics
        sel = years == y
        base[sel] = (base[sel] - base[sel].mean()) / base[sel].std()
    seasonal = 0.10 * np.cos(2 * np.pi * (doy - 80) / 365.0)
    diurnal = 0.12 * np.cos(2 * np.pi * (hour - 2.0) / 24.0)
    speed_shape = np.exp(0.38 * base + seasonal + diurnal)

    def power_curve(k):
        v = k * speed_shape
        cut_in, rated, cut_out = 3.0, 11.5, 25.0
        cf = (v ** 3 - cut_in ** 3) / (rated ** 3 - cut_in ** 3)
        cf = np.clip(cf, 0.0, 1.0)
        cf[v >= cut_out] = 0.0
        return cf

    lo, hi = 1.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if power_curve(mid).mean() < WIND_MEAN:
            lo = mid
        else:
            hi = mid
    wind = power_curve(0.5 * (lo + hi))
    return stamps, solar, wind


def write_capacity_factors(path: str | Path, seed: int = 2016, decimals: int = 4):
    stamps, solar, wind = synthesize_capacity_factors(seed)
    solar = np.round(solar, decimals)
    wind = np.round(wind, decimals)
    # rounding moves the means slightly; nudge the largest sub-unit entries back
    for arr, target in ((solar, SOLAR_MEAN), (wind, WIND_MEAN)):
        step = 10.0 ** -decimals
        diff = int(round((target - arr.mean()) * len(arr) / step))
        idx = np.flatnonzero((arr > step) & (arr < 1 - step))
        idx = idx[np.argsort(-arr[idx], kind="stable")][: abs(diff)]
        arr[idx] += np.sign(diff) * step
        np.round(arr, decimals, out=arr)
    fmt = f"{{:.{decimals}f}}"
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "solar", "wind"])
        for s, a, b in zip(stamps, solar, wind):
            w.writerow([s.strftime("%Y-%m-%dT%H:%M"), fmt.format(a), fmt.format(b)])


def year_offset(year: int, first_year: int = FIRST_YEAR) -> tuple[int, int]:
    """Row offset and length of calendar ``year`` in the bundled hourly file."""
    if not first_year <= year <= LAST_YEAR:
        raise SeriesError(f"year {year} outside the bundled {first_year}-{LAST_YEAR} range")
    start = int((datetime(year, 1, 1) - datetime(first_year, 1, 1)).total_seconds() // 3600)
    length = int((datetime(year + 1, 1, 1) - datetime(year, 1, 1)).total_seconds() // 3600)
    return start, length
