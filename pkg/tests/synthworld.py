"""Synthetic ground-truth weather world for end-to-end tests.

A known data-generating process over August hours at a southern-hemisphere
site: AR(1) wind on an hour-of-day profile, iid daily clearness index from
the tropical law (gamma=2, Kt_max=0.75), temperature as a fixed smooth
function of (global radiation, wind), and relative humidity as a fixed
linear map of temperature. Everything is seeded and reproducible, so
"measured" training years and held-out reference months come from one truth.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta

import numpy as np

from climagen import distfit, solargeo
from climagen.climdata import SiteMeta

SITE = SiteMeta(name="island21s", latitude=-21.0, longitude=55.5, altitude=20.0, utc_offset=4.0)

# modest autocorrelation: strong enough to exercise identification and
# Yule-Walker recovery, mild enough that the iid-calibrated KS comparison of
# month-long sequences is not dominated by effective-sample-size inflation
WIND_PHI = 0.30
WIND_STD = 1.2
KT_GAMMA = 2.0
KT_MAX = 0.75


def wind_profile_mean(hour: int) -> float:
    return 5.0 + 1.5 * np.sin(2.0 * np.pi * (hour - 9) / 24.0)


def true_temperature(global_rad, wind):
    g = np.asarray(global_rad, dtype=float)
    w = np.asarray(wind, dtype=float)
    return 24.0 + 3.5 * np.tanh(0.004 * g - 0.5) - 0.8 * np.tanh(0.7 * (w - 5.0))


def true_humidity(temp):
    return 90.0 - 2.2 * (np.asarray(temp, dtype=float) - 22.0)


def august_hours(year: int) -> list[datetime]:
    start = datetime(year, 8, 1)
    return [start + timedelta(hours=i) for i in range(31 * 24)]


def truth_august(year: int, seed: int) -> tuple[list[datetime], dict[str, np.ndarray]]:
    """One August of hourly truth data."""
    rng = np.random.default_rng(seed)
    ts = august_hours(year)
    n = len(ts)

    z = np.zeros(n + 200)
    innov_sigma = float(np.sqrt(1.0 - WIND_PHI**2))
    for t in range(1, n + 200):
        z[t] = WIND_PHI * z[t - 1] + rng.normal(0.0, innov_sigma)
    z = z[200:]
    mu = np.array([wind_profile_mean(t.hour) for t in ts])
    wind = np.maximum(mu + WIND_STD * z, 0.0)

    params = distfit.SaunierParams(
        gamma1=KT_GAMMA,
        c1=distfit.c1_of_gamma(KT_GAMMA),
        x_moy=distfit.x_moy_of_gamma(KT_GAMMA),
        kt_moy=distfit.x_moy_of_gamma(KT_GAMMA) * KT_MAX,
        kt_max=KT_MAX,
    )
    x = distfit._saunier_sample(params, 31, rng)
    kt_day = x * KT_MAX
    day_index = np.array([t.day - 1 for t in ts])
    i0 = solargeo.extraterrestrial_series(SITE, ts, "hourly")
    global_rad = kt_day[day_index] * i0

    temp = true_temperature(global_rad, wind)
    rh = true_humidity(temp)
    return ts, {
        "wind_speed": wind,
        "global_rad": global_rad,
        "dry_bulb_temp": temp,
        "rel_humidity": rh,
    }


def write_csv(path, timestamps, columns) -> None:
    names = list(columns)
    lines = [",".join(["timestamp"] + names)]
    for i, t in enumerate(timestamps):
        lines.append(",".join([t.isoformat()] + [repr(float(columns[c][i])) for c in names]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_measured_years(path, years=(2001, 2002, 2003), seed: int = 500) -> None:
    """Several Augusts of truth data appended into one measured-data CSV."""
    all_ts: list[datetime] = []
    cols: dict[str, list[float]] = {}
    for k, year in enumerate(years):
        ts, c = truth_august(year, seed + k)
        all_ts += ts
        for name, vals in c.items():
            cols.setdefault(name, []).extend(vals.tolist())
    write_csv(path, all_ts, {k: np.asarray(v) for k, v in cols.items()})
