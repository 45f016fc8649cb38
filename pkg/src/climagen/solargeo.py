"""Solar geometry: extraterrestrial radiation, day length, clearness index.

Standard solar-engineering relations (Duffie & Beckman style):

    declination  d = 23.45 sin(2*pi*(284+n)/365)            [Cooper]
    eccentricity E0 = 1 + 0.033 cos(2*pi*n/365)
    hour angle   w = 15*(solar_time - 12) deg, solar_time from the site
                 meridian offset plus Spencer's equation of time
    sunset angle ws = arccos(-tan(lat) tan(d)), clamped for polar cases
    I0 = Gsc*E0*cos(zenith) on a horizontal plane, zero below the horizon
    H0 = (24/pi)*Gsc*E0*(cos lat cos d sin ws + ws sin lat sin d)  [Wh/m2]

Daily global_rad values are treated as daily mean irradiance in W/m2, so the
daily clearness index is 24*mean/H0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .climdata import DAILY, HOURLY, ClimateSeries, SiteMeta
from .errors import DataError, UsageError

SOLAR_CONSTANT = 1367.0  # W/m2

#: below this extraterrestrial irradiance the sun is treated as down
NIGHT_I0_THRESHOLD = 1.0  # W/m2


@dataclass
class SolarDay:
    """Per-day solar geometry for one site."""

    day_of_year: int
    declination: float  # degrees
    sunset_hour_angle: float  # degrees
    day_length_s0: float  # hours
    daily_h0: float  # Wh/m2 extraterrestrial on horizontal
    hourly_i0: np.ndarray  # W/m2 at each clock hour's midpoint, length 24


def _declination_deg(n: int) -> float:
    return 23.45 * math.sin(2.0 * math.pi * (284 + n) / 365.0)


def _eccentricity(n: int) -> float:
    return 1.0 + 0.033 * math.cos(2.0 * math.pi * n / 365.0)


def _equation_of_time_min(n: int) -> float:
    """Spencer (1971) equation of time in minutes."""
    b = 2.0 * math.pi * (n - 1) / 365.0
    return 229.18 * (
        0.000075
        + 0.001868 * math.cos(b)
        - 0.032077 * math.sin(b)
        - 0.014615 * math.cos(2 * b)
        - 0.04089 * math.sin(2 * b)
    )


def _solar_time(site: SiteMeta, when: datetime) -> float:
    """Apparent solar time in hours for a clock time at the site."""
    n = when.timetuple().tm_yday
    clock = when.hour + when.minute / 60.0 + when.second / 3600.0
    meridian = 15.0 * site.utc_offset  # east positive
    return clock + ((site.longitude - meridian) * 4.0 + _equation_of_time_min(n)) / 60.0


def cos_zenith(site: SiteMeta, when: datetime) -> float:
    n = when.timetuple().tm_yday
    decl = math.radians(_declination_deg(n))
    lat = math.radians(site.latitude)
    omega = math.radians(15.0 * (_solar_time(site, when) - 12.0))
    return math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(omega)


def extraterrestrial_irradiance(site: SiteMeta, when: datetime) -> float:
    """Instantaneous horizontal I0 in W/m2; zero below the horizon."""
    n = when.timetuple().tm_yday
    return max(0.0, SOLAR_CONSTANT * _eccentricity(n) * cos_zenith(site, when))


def solar_elevation(site: SiteMeta, when: datetime) -> float:
    """Sun elevation angle in degrees (negative below the horizon)."""
    return math.degrees(math.asin(max(-1.0, min(1.0, cos_zenith(site, when)))))


def solar_day(site: SiteMeta, day: date) -> SolarDay:
    """Geometry bundle for one calendar day: declination, ws, S0, H0, hourly I0."""
    n = day.timetuple().tm_yday
    decl = _declination_deg(n)
    lat = math.radians(site.latitude)
    # polar clamp: arccos argument pinned to [-1, 1] (midnight sun / polar night)
    cos_ws = max(-1.0, min(1.0, -math.tan(lat) * math.tan(math.radians(decl))))
    ws = math.degrees(math.acos(cos_ws))
    s0 = 2.0 * ws / 15.0
    ws_rad = math.radians(ws)
    h0 = (
        (24.0 / math.pi)
        * SOLAR_CONSTANT
        * _eccentricity(n)
        * (
            math.cos(lat) * math.cos(math.radians(decl)) * math.sin(ws_rad)
            + ws_rad * math.sin(lat) * math.sin(math.radians(decl))
        )
    )
    base = datetime(day.year, day.month, day.day)
    i0 = np.array(
        [
            extraterrestrial_irradiance(site, base + timedelta(hours=h + 0.5))
            for h in range(24)
        ]
    )
    return SolarDay(n, decl, ws, s0, max(h0, 0.0), i0)


def extraterrestrial_series(site: SiteMeta, timestamps: list[datetime], cadence: str) -> np.ndarray:
    """I0 per timestamp: hourly midpoint irradiance (W/m2) or daily mean (W/m2)."""
    if cadence == HOURLY:
        return np.array(
            [
                extraterrestrial_irradiance(site, ts + timedelta(minutes=30))
                for ts in timestamps
            ]
        )
    return np.array([solar_day(site, ts.date()).daily_h0 / 24.0 for ts in timestamps])


def clearness_index(global_rad: ClimateSeries, site: SiteMeta) -> ClimateSeries:
    """Kt = measured global / extraterrestrial, clamped to [0, 1]; night -> missing."""
    if site is None:
        raise UsageError("clearness_index needs site metadata")
    if global_rad.variable != "global_rad":
        raise UsageError(f"expected global_rad, got {global_rad.variable!r}")
    i0 = extraterrestrial_series(site, global_rad.timestamps, global_rad.cadence)
    kt = np.full(len(global_rad), np.nan)
    ok = np.isfinite(global_rad.values) & (i0 > NIGHT_I0_THRESHOLD)
    kt[ok] = np.clip(global_rad.values[ok] / i0[ok], 0.0, 1.0)
    return ClimateSeries(
        "clearness_index", global_rad.cadence, list(global_rad.timestamps), kt
    )


def daily_clearness_index(global_rad: ClimateSeries, site: SiteMeta) -> ClimateSeries:
    """Daily Kt from hourly global radiation: per-day energy ratio sum(G)/sum(I0).

    The ratio form weights hours by extraterrestrial irradiance, matching the
    daily-energy definition 24*mean/H0; days without any finite daylight
    value come out missing.
    """
    if global_rad.cadence != HOURLY:
        raise DataError("daily_clearness_index needs hourly global radiation")
    if global_rad.variable != "global_rad":
        raise UsageError(f"expected global_rad, got {global_rad.variable!r}")
    i0 = extraterrestrial_series(site, global_rad.timestamps, HOURLY)
    by_day: dict = {}
    for ts, g, e in zip(global_rad.timestamps, global_rad.values, i0):
        if e > NIGHT_I0_THRESHOLD and np.isfinite(g):
            num, den = by_day.get(ts.date(), (0.0, 0.0))
            by_day[ts.date()] = (num + float(g), den + float(e))
    days = sorted(by_day)
    vals = np.array(
        [min(max(by_day[d][0] / by_day[d][1], 0.0), 1.0) if by_day[d][1] > 0 else np.nan for d in days]
    )
    stamps = [datetime(d.year, d.month, d.day) for d in days]
    return ClimateSeries("clearness_index", DAILY, stamps, vals)


def sunshine_fraction(insolation: ClimateSeries, site: SiteMeta) -> ClimateSeries:
    """Daily sunshine-duration ratio S/S0, clamped to [0, 1]."""
    if insolation.cadence != DAILY:
        raise DataError("sunshine_fraction needs daily insolation data")
    if insolation.variable != "insolation_hours":
        raise UsageError(f"expected insolation_hours, got {insolation.variable!r}")
    s0 = np.array([solar_day(site, ts.date()).day_length_s0 for ts in insolation.timestamps])
    frac = np.full(len(insolation), np.nan)
    ok = np.isfinite(insolation.values) & (s0 > 0.0)
    frac[ok] = np.clip(insolation.values[ok] / s0[ok], 0.0, 1.0)
    return ClimateSeries("sunshine_fraction", DAILY, list(insolation.timestamps), frac)


def solar_elevation_series(site: SiteMeta, timestamps: list[datetime], cadence: str = HOURLY) -> np.ndarray:
    """Elevation angles (deg) per timestamp, at hour midpoints for hourly data.

    Handy as a companion series for solar-height selection criteria.
    """
    if cadence == HOURLY:
        return np.array(
            [solar_elevation(site, ts + timedelta(minutes=30)) for ts in timestamps]
        )
    return np.array([solar_elevation(site, ts.replace(hour=12)) for ts in timestamps])
