import math
from datetime import date, datetime, timedelta

import numpy as np
import pytest

from climagen import solargeo
from climagen.climdata import ClimateSeries, SiteMeta
from climagen.errors import DataError, UsageError

EQUATOR = SiteMeta("equator", 0.0, 0.0, 0.0, 0.0)
TROPICAL = SiteMeta("island21s", -21.0, 55.5, 20.0, 4.0)


class TestSolarDay:
    def test_equator_equinox_day_length(self):
        sd = solargeo.solar_day(EQUATOR, date(2003, 3, 21))
        assert sd.day_length_s0 == pytest.approx(12.0, abs=0.1)

    def test_equinox_declination_near_zero(self):
        sd = solargeo.solar_day(EQUATOR, date(2003, 3, 21))
        assert abs(sd.declination) < 0.5

    def test_frozen_h0_mid_august_21s(self):
        # direct evaluation of the standard relations, frozen as regression value
        sd = solargeo.solar_day(TROPICAL, date(2003, 8, 15))
        assert sd.daily_h0 == pytest.approx(7917.2432, abs=0.01)

    def test_equator_day_length_all_year(self):
        for doy in range(1, 366, 14):
            d = date(2003, 1, 1) + timedelta(days=doy - 1)
            sd = solargeo.solar_day(EQUATOR, d)
            assert sd.day_length_s0 == pytest.approx(12.0, abs=0.1)

    def test_polar_clamp(self):
        arctic = SiteMeta("arctic", 80.0, 0.0, 0.0, 0.0)
        midsummer = solargeo.solar_day(arctic, date(2003, 6, 21))
        midwinter = solargeo.solar_day(arctic, date(2003, 12, 21))
        assert midsummer.day_length_s0 == pytest.approx(24.0, abs=1e-6)
        assert midwinter.day_length_s0 == pytest.approx(0.0, abs=1e-6)

    def test_i0_nonnegative_and_zero_at_night(self):
        sd = solargeo.solar_day(TROPICAL, date(2003, 8, 15))
        assert np.all(sd.hourly_i0 >= 0.0)
        assert sd.hourly_i0[0] == 0.0 and sd.hourly_i0[23] == 0.0

    def test_i0_integrates_to_h0_within_2pct(self):
        for lat in (-45.0, -21.0, 0.0, 30.0, 60.0):
            site = SiteMeta("x", lat, 0.0, 0.0, 0.0)
            for doy in (15, 105, 196, 288, 349):
                d = date(2003, 1, 1) + timedelta(days=doy - 1)
                sd = solargeo.solar_day(site, d)
                if sd.daily_h0 > 100.0:
                    assert sd.hourly_i0.sum() == pytest.approx(sd.daily_h0, rel=0.02)


def hourly_series(variable, values, start=datetime(2003, 8, 15)):
    ts = [start + timedelta(hours=i) for i in range(len(values))]
    return ClimateSeries(variable, "hourly", ts, np.asarray(values, dtype=float))


class TestClearnessIndex:
    def test_zero_global_gives_zero_kt_by_day(self):
        g = hourly_series("global_rad", [0.0] * 24)
        kt = solargeo.clearness_index(g, TROPICAL)
        daylight = np.isfinite(kt.values)
        assert daylight.any()
        assert np.all(kt.values[daylight] == 0.0)

    def test_global_equal_i0_gives_one(self):
        ts = [datetime(2003, 8, 15) + timedelta(hours=i) for i in range(24)]
        i0 = solargeo.extraterrestrial_series(TROPICAL, ts, "hourly")
        g = ClimateSeries("global_rad", "hourly", ts, i0)
        kt = solargeo.clearness_index(g, TROPICAL)
        ok = np.isfinite(kt.values)
        assert np.allclose(kt.values[ok], 1.0)

    def test_fixed_noon_ratio(self):
        ts = [datetime(2003, 8, 15, 12)]
        i0 = solargeo.extraterrestrial_series(TROPICAL, ts, "hourly")[0]
        g = ClimateSeries("global_rad", "hourly", ts, np.array([500.0]))
        kt = solargeo.clearness_index(g, TROPICAL)
        assert kt.values[0] == pytest.approx(500.0 / i0, abs=1e-12)

    def test_night_becomes_missing_and_range(self):
        g = hourly_series("global_rad", [300.0] * 24)
        kt = solargeo.clearness_index(g, TROPICAL)
        assert not math.isfinite(kt.values[0])  # midnight
        finite = kt.values[np.isfinite(kt.values)]
        assert np.all((finite >= 0.0) & (finite <= 1.0))

    def test_requires_site(self):
        g = hourly_series("global_rad", [100.0])
        with pytest.raises(UsageError):
            solargeo.clearness_index(g, None)


class TestSunshineFraction:
    def daily(self, values, start=datetime(2003, 3, 20)):
        ts = [start + timedelta(days=i) for i in range(len(values))]
        return ClimateSeries("insolation_hours", "daily", ts, np.asarray(values, float))

    def test_full_and_zero(self):
        s0 = solargeo.solar_day(EQUATOR, date(2003, 3, 20)).day_length_s0
        f = solargeo.sunshine_fraction(self.daily([s0, 0.0]), EQUATOR)
        assert f.values[0] == pytest.approx(1.0, abs=1e-9)
        assert f.values[1] == 0.0

    def test_six_hours_at_equinox_is_half(self):
        f = solargeo.sunshine_fraction(self.daily([6.0], start=datetime(2003, 3, 21)), EQUATOR)
        assert f.values[0] == pytest.approx(0.5, abs=0.01)

    def test_hourly_rejected(self):
        s = hourly_series("insolation_hours", [1.0])
        with pytest.raises(DataError):
            solargeo.sunshine_fraction(s, EQUATOR)

    def test_clamped_to_unit(self):
        f = solargeo.sunshine_fraction(self.daily([24.0]), EQUATOR)
        assert f.values[0] == 1.0
