"""Measured weather series: ingestion, selection, descriptive statistics, bin data.

A ClimateSeries holds one variable on a fixed hourly or daily grid. Missing
values are NaN internally; sentinel numerics (default -999) are converted at
ingestion and never travel further.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import DataError, UsageError

HOURLY = "hourly"
DAILY = "daily"

#: canonical variable names -> (units, lower bound, upper bound); None = unbounded.
VARIABLES: dict[str, tuple[str, float | None, float | None]] = {
    "dry_bulb_temp": ("degC", None, None),
    "wet_bulb_temp": ("degC", None, None),
    "rel_humidity": ("%", 0.0, 100.0),
    "wind_speed": ("m/s", 0.0, None),
    "wind_direction": ("deg", 0.0, 360.0),
    "global_rad": ("W/m2", 0.0, None),
    "diffuse_rad": ("W/m2", 0.0, None),
    "beam_rad": ("W/m2", 0.0, None),
    "insolation_hours": ("h", 0.0, 24.0),
    "nebulosity": ("octas", 0.0, 8.0),
    "pressure": ("hPa", 0.0, None),
    "clearness_index": ("-", 0.0, 1.0),
    # derived, not expected in measured files
    "sunshine_fraction": ("-", 0.0, 1.0),
}

CADENCE_HOURS = {HOURLY: 1.0, DAILY: 24.0}


@dataclass(frozen=True)
class SiteMeta:
    """Geographic context of the measurement site (used for solar geometry)."""

    name: str
    latitude: float  # degrees, north positive
    longitude: float  # degrees, east positive
    altitude: float  # meters
    utc_offset: float  # hours ahead of UTC

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise DataError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise DataError(f"longitude {self.longitude} outside [-180, 180]")
        if not -12.0 <= self.utc_offset <= 14.0:
            raise DataError(f"utc_offset {self.utc_offset} outside [-12, +14]")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "altitude": self.altitude,
            "utc_offset": self.utc_offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SiteMeta":
        return cls(
            name=d["name"],
            latitude=float(d["latitude"]),
            longitude=float(d["longitude"]),
            altitude=float(d.get("altitude", 0.0)),
            utc_offset=float(d.get("utc_offset", 0.0)),
        )


@dataclass
class ClimateSeries:
    """One variable's values on strictly increasing timestamps at fixed cadence.

    Timestamps label interval starts (an hourly stamp 08:00 covers 08:00-09:00).
    After criteria selection the grid may have holes, but spacing stays an
    integer multiple of the cadence step.
    """

    variable: str
    cadence: str
    timestamps: list[datetime]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise UsageError(f"unknown variable {self.variable!r}")
        if self.cadence not in CADENCE_HOURS:
            raise UsageError(f"unknown cadence {self.cadence!r}")
        self.values = np.asarray(self.values, dtype=float)
        if len(self.timestamps) != self.values.size:
            raise DataError(
                f"{len(self.timestamps)} timestamps vs {self.values.size} values"
            )
        step = timedelta(hours=CADENCE_HOURS[self.cadence])
        for i in range(1, len(self.timestamps)):
            gap = self.timestamps[i] - self.timestamps[i - 1]
            if gap <= timedelta(0):
                raise DataError(f"timestamps not strictly increasing at row {i + 1}")
            ratio = gap / step
            if abs(ratio - round(ratio)) > 1e-9:
                raise DataError(
                    f"timestamp gap at row {i + 1} is not a multiple of the "
                    f"{self.cadence} step"
                )
        _, lo, hi = VARIABLES[self.variable]
        finite = self.values[np.isfinite(self.values)]
        if lo is not None and finite.size and float(finite.min()) < lo - 1e-9:
            raise DataError(f"{self.variable} below lower bound {lo}")
        if hi is not None and finite.size and float(finite.max()) > hi + 1e-9:
            raise DataError(f"{self.variable} above upper bound {hi}")

    def __len__(self) -> int:
        return self.values.size

    @property
    def missing_mask(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    def non_missing(self) -> np.ndarray:
        return self.values[np.isfinite(self.values)]

    def segments(self) -> list[tuple[int, int]]:
        """Index ranges [start, stop) of runs contiguous at the cadence step."""
        if not self.timestamps:
            return []
        step = timedelta(hours=CADENCE_HOURS[self.cadence])
        out = []
        start = 0
        for i in range(1, len(self.timestamps)):
            if self.timestamps[i] - self.timestamps[i - 1] != step:
                out.append((start, i))
                start = i
        out.append((start, len(self.timestamps)))
        return out


@dataclass(frozen=True)
class Predicate:
    """Half-open value bin [lo, hi) on a companion variable."""

    variable: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise UsageError(f"empty interval [{self.lo}, {self.hi}) on {self.variable}")


@dataclass(frozen=True)
class SelectionCriteria:
    """Climatic-condition filter: months, hour band, and value bins."""

    months: frozenset[int] = frozenset(range(1, 13))
    hour_range: tuple[int, int] | None = None  # inclusive [h0, h1]
    predicates: tuple[Predicate, ...] = ()

    def __post_init__(self):
        if not self.months:
            raise UsageError("criteria needs at least one month")
        if not all(1 <= m <= 12 for m in self.months):
            raise UsageError("months must lie in 1..12")
        if self.hour_range is not None:
            h0, h1 = self.hour_range
            if not (0 <= h0 <= h1 <= 23):
                raise UsageError(f"bad hour_range {self.hour_range}")

    def to_dict(self) -> dict:
        return {
            "months": sorted(self.months),
            "hour_range": list(self.hour_range) if self.hour_range else None,
            "predicates": [[p.variable, p.lo, p.hi] for p in self.predicates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionCriteria":
        preds = tuple(Predicate(v, float(lo), float(hi)) for v, lo, hi in d.get("predicates") or [])
        hr = d.get("hour_range")
        return cls(
            months=frozenset(d.get("months") or range(1, 13)),
            hour_range=tuple(hr) if hr else None,
            predicates=preds,
        )


@dataclass
class BinTable:
    """Histogram of hours spent per value interval, for equipment sizing."""

    variable: str
    bin_width: float
    bins: list[tuple[float, int, float]]  # (lower_edge, count, hours)


@dataclass
class SummaryStats:
    mean: float
    std: float
    min: float
    max: float
    count: int
    missing_count: int
    degenerate: bool = False  # n < 2: std reported as 0


# ---------------------------------------------------------------------------
# ingestion

def _detect_cadence(timestamps: list[datetime]) -> str:
    gaps = [
        (timestamps[i] - timestamps[i - 1]).total_seconds() / 3600.0
        for i in range(1, len(timestamps))
    ]
    med = float(np.median(gaps)) if gaps else 1.0
    if med <= 1.5:
        return HOURLY
    if 18.0 <= med <= 36.0:
        return DAILY
    raise DataError(f"unsupported cadence: median timestamp gap {med:.2f} h")


def ingest_csv(
    path,
    schema: dict[str, str] | None = None,
    missing_sentinel: float = -999.0,
) -> tuple[SiteMeta | None, list[ClimateSeries]]:
    """Read a measured-weather CSV into one ClimateSeries per mapped column.

    Expected layout: header row, a `timestamp` column in ISO-8601 local time,
    one column per variable named after the canonical variable list. `schema`
    remaps CSV column names to canonical ones ({csv_col: variable} with one
    entry mapped to "timestamp"). Lines starting with `#` carry provenance
    and are skipped. Unparseable or sentinel cells become missing; values
    outside a variable's physical range are demoted to missing as well.
    Rows are regularized onto the detected cadence grid, inserting missing
    markers into any holes.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data_rows = rows[1:]

    if schema is None:
        schema = {h: h for h in header if h == "timestamp" or h in VARIABLES}
    ts_cols = [c for c, v in schema.items() if v == "timestamp"]
    if len(ts_cols) != 1:
        raise UsageError("schema must map exactly one column to 'timestamp'")
    for col, var in schema.items():
        if var != "timestamp" and var not in VARIABLES:
            raise UsageError(f"unknown variable {var!r} for column {col!r}")
        if col not in header:
            raise DataError(f"{path}: column {col!r} not in header")
    var_cols = {col: var for col, var in schema.items() if var != "timestamp"}
    if not var_cols:
        raise DataError(f"{path}: no variable columns mapped")
    idx = {col: header.index(col) for col in schema}

    timestamps: list[datetime] = []
    raw: dict[str, list[float]] = {v: [] for v in var_cols.values()}
    for rownum, row in enumerate(data_rows, start=1):
        try:
            ts = datetime.fromisoformat(row[idx[ts_cols[0]]].strip())
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad timestamp at row {rownum}: {exc}") from exc
        if timestamps and ts <= timestamps[-1]:
            raise DataError(f"{path}: timestamps not increasing at row {rownum}")
        timestamps.append(ts)
        for col, var in var_cols.items():
            try:
                x = float(row[idx[col]])
            except (ValueError, IndexError):
                x = math.nan
            if x == missing_sentinel:
                x = math.nan
            _, lo, hi = VARIABLES[var]
            if math.isfinite(x) and (
                (lo is not None and x < lo) or (hi is not None and x > hi)
            ):
                x = math.nan
            raw[var].append(x)
    if not timestamps:
        raise DataError(f"{path}: no data rows")

    cadence = _detect_cadence(timestamps) if len(timestamps) > 1 else HOURLY
    step = timedelta(hours=CADENCE_HOURS[cadence])
    grid: list[datetime] = []
    pos: list[int] = []  # grid index of each source row
    t = timestamps[0]
    for ts in timestamps:
        while t < ts:
            grid.append(t)
            t += step
        if t != ts:
            raise DataError(f"{path}: timestamp {ts} off the {cadence} grid")
        pos.append(len(grid))
        grid.append(t)
        t += step

    series = []
    for var, vals in raw.items():
        full = np.full(len(grid), np.nan)
        full[pos] = vals
        series.append(ClimateSeries(var, cadence, grid, full))
    return None, series


# ---------------------------------------------------------------------------
# selection

def select(
    series: ClimateSeries,
    criteria: SelectionCriteria,
    companions: list[ClimateSeries] | None = None,
) -> ClimateSeries:
    """Sub-series whose timestamps satisfy months, hour band, and all predicates.

    Predicate variables are looked up among `companions` (or the series
    itself), which must share the series' timestamp grid. An empty result is
    allowed and returns a zero-length series.
    """
    companions = companions or []
    by_var = {s.variable: s for s in companions}
    by_var.setdefault(series.variable, series)

    keep = np.ones(len(series), dtype=bool)
    for i, ts in enumerate(series.timestamps):
        if ts.month not in criteria.months:
            keep[i] = False
        elif criteria.hour_range is not None and not (
            criteria.hour_range[0] <= ts.hour <= criteria.hour_range[1]
        ):
            keep[i] = False
    for pred in criteria.predicates:
        if pred.variable not in by_var:
            raise UsageError(
                f"predicate variable {pred.variable!r} not among companion series"
            )
        comp = by_var[pred.variable]
        if comp.timestamps != series.timestamps:
            raise DataError(
                f"companion {pred.variable!r} not aligned with {series.variable!r}"
            )
        v = comp.values
        keep &= np.isfinite(v) & (v >= pred.lo) & (v < pred.hi)

    ts_kept = [t for t, k in zip(series.timestamps, keep) if k]
    return ClimateSeries(series.variable, series.cadence, ts_kept, series.values[keep])


def describe(series: ClimateSeries) -> SummaryStats:
    """Summary statistics over non-missing values (sample std, n-1 divisor)."""
    vals = series.non_missing()
    missing = int(series.missing_mask.sum())
    if vals.size == 0:
        raise DataError(f"{series.variable}: no data")
    if vals.size == 1:
        return SummaryStats(
            mean=float(vals[0]), std=0.0, min=float(vals[0]), max=float(vals[0]),
            count=1, missing_count=missing, degenerate=True,
        )
    return SummaryStats(
        mean=float(vals.mean()),
        std=float(vals.std(ddof=1)),
        min=float(vals.min()),
        max=float(vals.max()),
        count=int(vals.size),
        missing_count=missing,
    )


def bin_data(series: ClimateSeries, bin_width: float) -> BinTable:
    """Bin non-missing values into width-`bin_width` intervals anchored at
    floor(min/width)*width; `hours` scales counts by the cadence step."""
    if bin_width <= 0:
        raise UsageError("bin_width must be > 0")
    vals = series.non_missing()
    if vals.size == 0:
        raise DataError(f"{series.variable}: no data to bin")
    lo = math.floor(vals.min() / bin_width) * bin_width
    nbins = int(math.floor((vals.max() - lo) / bin_width)) + 1
    counts = np.zeros(nbins, dtype=int)
    ix = np.minimum(((vals - lo) / bin_width).astype(int), nbins - 1)
    np.add.at(counts, ix, 1)
    hours_per = CADENCE_HOURS[series.cadence]
    bins = [
        (lo + i * bin_width, int(counts[i]), float(counts[i] * hours_per))
        for i in range(nbins)
    ]
    return BinTable(series.variable, bin_width, bins)


# ---------------------------------------------------------------------------
# psychrometrics
#
# Saturation vapor pressure over water: Magnus form of the WMO CIMO guide,
# es(T) = 6.112 exp(17.62 T / (243.12 + T)) hPa. The wet-bulb balance is the
# standard adiabatic-saturation relation with enthalpy constants in kJ/kg
# (2501 latent heat at 0 degC, 1.006/1.86 dry-air/vapor cp, 4.186 liquid cp).

def saturation_vapor_pressure(t: float) -> float:
    """es over water in hPa at temperature t in degC."""
    return 6.112 * math.exp(17.62 * t / (243.12 + t))


def humidity_ratio(vapor_pressure: float, pressure: float) -> float:
    """kg water per kg dry air from partial pressure and total pressure (hPa)."""
    return 0.621945 * vapor_pressure / (pressure - vapor_pressure)


def dew_point(t_db: float, rh: float) -> float:
    """Dew point in degC by Magnus inversion; rh in percent."""
    if rh <= 0.0:
        return -100.0  # practical floor, actual dew point diverges to -inf
    ln_ratio = math.log(rh / 100.0 * saturation_vapor_pressure(t_db) / 6.112)
    return 243.12 * ln_ratio / (17.62 - ln_ratio)


def _wet_bulb_balance(t_wb: float, t_db: float, pressure: float) -> float:
    """Humidity ratio a parcel must have so its wet bulb equals t_wb."""
    ws = humidity_ratio(saturation_vapor_pressure(t_wb), pressure)
    return ((2501.0 - 2.326 * t_wb) * ws - 1.006 * (t_db - t_wb)) / (
        2501.0 + 1.86 * t_db - 4.186 * t_wb
    )


def wet_bulb(t_db: float, rh: float, pressure: float = 1013.25) -> float:
    """Thermodynamic wet-bulb temperature (degC) by bisection on [dew point, t_db].

    The balance residual is driven below 1e-9 in humidity-ratio units
    (comfortably under the 1e-6 contract); t_wb <= t_db is guaranteed.
    """
    if not 0.0 <= rh <= 100.0:
        raise DataError(f"rel_humidity {rh} outside [0, 100]")
    if pressure <= 0.0:
        raise DataError("pressure must be positive")
    w_actual = humidity_ratio(rh / 100.0 * saturation_vapor_pressure(t_db), pressure)
    lo, hi = dew_point(t_db, rh), t_db
    if hi - lo < 1e-12:
        return t_db
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        resid = _wet_bulb_balance(mid, t_db, pressure) - w_actual
        if abs(resid) < 1e-9 and hi - lo < 1e-9:
            break
        if resid > 0.0:
            hi = mid
        else:
            lo = mid
    return min(0.5 * (lo + hi), t_db)
