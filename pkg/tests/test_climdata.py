import math
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climagen import climdata
from climagen.climdata import (
    ClimateSeries,
    Predicate,
    SelectionCriteria,
    SiteMeta,
    bin_data,
    describe,
    ingest_csv,
    select,
    wet_bulb,
)
from climagen.errors import DataError, UsageError

from conftest import make_series


def write_csv(tmp_path, rows, header="timestamp,dry_bulb_temp"):
    p = tmp_path / "data.csv"
    p.write_text("\n".join([header] + rows) + "\n")
    return p


class TestIngest:
    def test_three_rows_with_missing(self, tmp_path):
        p = write_csv(tmp_path, [
            "2001-01-01T00:00,20.0",
            "2001-01-01T01:00,21.0",
            "2001-01-01T02:00,-999",
        ])
        _, series = ingest_csv(p)
        (s,) = series
        assert len(s) == 3
        assert s.values[0] == 20.0 and s.values[1] == 21.0
        assert math.isnan(s.values[2])

    def test_out_of_order_rejected_with_row(self, tmp_path):
        p = write_csv(tmp_path, [
            "2001-01-01T02:00,20.0",
            "2001-01-01T01:00,21.0",
        ])
        with pytest.raises(DataError, match="row 2"):
            ingest_csv(p)

    def test_hourly_cadence_detected(self, tmp_path):
        rows = [f"2001-01-01T{h:02d}:00,{15 + h * 0.1}" for h in range(24)]
        p = write_csv(tmp_path, rows)
        _, (s,) = ingest_csv(p)
        assert s.cadence == "hourly"
        assert len(s) == 24

    def test_daily_cadence_detected(self, tmp_path):
        rows = [f"2001-01-{d:02d}T00:00,{15 + d * 0.1}" for d in range(1, 11)]
        p = write_csv(tmp_path, rows)
        _, (s,) = ingest_csv(p)
        assert s.cadence == "daily"

    def test_unknown_variable_rejected(self, tmp_path):
        p = write_csv(tmp_path, ["2001-01-01T00:00,1"], header="timestamp,dry_bulb_temp")
        with pytest.raises(UsageError):
            ingest_csv(p, schema={"timestamp": "timestamp", "dry_bulb_temp": "sauna_temp"})

    def test_unparseable_cell_becomes_missing(self, tmp_path):
        p = write_csv(tmp_path, [
            "2001-01-01T00:00,oops",
            "2001-01-01T01:00,21.0",
        ])
        _, (s,) = ingest_csv(p)
        assert math.isnan(s.values[0])

    def test_gap_filled_with_missing(self, tmp_path):
        p = write_csv(tmp_path, [
            "2001-01-01T00:00,20.0",
            "2001-01-01T01:00,21.0",
            "2001-01-01T02:00,22.0",
            "2001-01-01T05:00,25.0",
        ])
        _, (s,) = ingest_csv(p)
        assert len(s) == 6
        assert math.isnan(s.values[3]) and math.isnan(s.values[4])
        assert s.values[5] == 25.0

    def test_out_of_range_demoted_to_missing(self, tmp_path):
        p = write_csv(tmp_path, [
            "2001-01-01T00:00,120.0",
            "2001-01-01T01:00,55.0",
        ], header="timestamp,rel_humidity")
        _, (s,) = ingest_csv(p)
        assert math.isnan(s.values[0]) and s.values[1] == 55.0


class TestSelect:
    def test_month_filter(self):
        s = make_series(np.arange(365.0), cadence="daily", start=datetime(2001, 1, 1))
        out = select(s, SelectionCriteria(months=frozenset({8})))
        assert all(t.month == 8 for t in out.timestamps)
        assert len(out) == 31

    def test_predicate_half_open(self):
        winds = make_series([1.0, 2.0, 3.0, 4.0], variable="wind_speed")
        temps = make_series([10.0, 11.0, 12.0, 13.0])
        crit = SelectionCriteria(predicates=(Predicate("wind_speed", 2.0, 4.0),))
        out = select(temps, crit, companions=[winds])
        assert list(out.values) == [11.0, 12.0]

    def test_empty_result_ok(self):
        s = make_series([1.0, 2.0], start=datetime(2001, 3, 1))
        out = select(s, SelectionCriteria(months=frozenset({8})))
        assert len(out) == 0

    def test_missing_companion_named(self):
        s = make_series([1.0, 2.0])
        crit = SelectionCriteria(predicates=(Predicate("wind_speed", 0.0, 5.0),))
        with pytest.raises(UsageError, match="wind_speed"):
            select(s, crit)

    def test_hour_range_inclusive(self):
        s = make_series(np.arange(24.0))
        out = select(s, SelectionCriteria(hour_range=(8, 18)))
        assert [t.hour for t in out.timestamps] == list(range(8, 19))

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        s = make_series(rng.normal(20, 5, size=400), start=datetime(2001, 1, 1))
        crit = SelectionCriteria(months=frozenset({1}), hour_range=(6, 20))
        once = select(s, crit)
        twice = select(once, crit)
        assert once.timestamps == twice.timestamps
        np.testing.assert_array_equal(once.values, twice.values)

    def test_describe_invariant_under_allpass_criteria(self):
        rng = np.random.default_rng(4)
        s = make_series(rng.normal(20, 5, size=300))
        full = select(s, SelectionCriteria())
        assert describe(s) == describe(full)


class TestDescribe:
    def test_hand_values(self):
        st_ = describe(make_series([1.0, 2.0, 3.0]))
        assert st_.mean == 2.0 and st_.std == 1.0
        assert st_.min == 1.0 and st_.max == 3.0 and st_.count == 3

    def test_single_value_degenerate(self):
        st_ = describe(make_series([5.0]))
        assert st_.mean == 5.0 and st_.std == 0.0 and st_.degenerate

    def test_missing_excluded(self):
        st_ = describe(make_series([1.0, np.nan, 3.0]))
        assert st_.count == 2 and st_.missing_count == 1 and st_.mean == 2.0

    def test_all_missing_errors(self):
        with pytest.raises(DataError, match="no data"):
            describe(make_series([np.nan, np.nan]))


class TestBins:
    def test_hand_count(self):
        table = bin_data(make_series([1.2, 3.4, 3.6]), 1.0)
        by_edge = {edge: count for edge, count, _ in table.bins}
        assert by_edge[1.0] == 1 and by_edge[3.0] == 2
        assert by_edge.get(2.0, 0) == 0

    def test_singleton(self):
        table = bin_data(make_series([5.0]), 2.0)
        assert table.bins == [(4.0, 1, 1.0)]

    def test_hours_scaling(self):
        hourly = bin_data(make_series([1.0] * 10), 1.0)
        assert hourly.bins[0][2] == 10.0
        daily = bin_data(make_series([1.0] * 10, cadence="daily"), 1.0)
        assert daily.bins[0][2] == 240.0

    @given(
        st.lists(st.floats(-50, 50), min_size=1, max_size=80),
        st.floats(0.1, 10.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_counts_sum_to_n(self, values, width):
        table = bin_data(make_series(values), width)
        assert sum(c for _, c, _ in table.bins) == len(values)


class TestWetBulb:
    def test_saturation_identity(self):
        assert wet_bulb(25.0, 100.0, 1013.25) == pytest.approx(25.0, abs=1e-6)

    def test_frozen_oracle_value(self):
        # computed once with an independent brentq solve of the same balance
        assert wet_bulb(30.0, 50.0, 1013.25) == pytest.approx(22.01037396, abs=1e-6)
        assert wet_bulb(20.0, 30.0, 900.0) == pytest.approx(10.38286296, abs=1e-6)

    def test_rh_out_of_range(self):
        with pytest.raises(DataError):
            wet_bulb(25.0, 120.0, 1013.25)

    def test_never_exceeds_dry_bulb_and_monotone_in_rh(self):
        for t in (-5.0, 10.0, 25.0, 40.0):
            prev = -1e9
            for rh in range(5, 101, 5):
                twb = wet_bulb(t, float(rh), 1013.25)
                assert twb <= t + 1e-9
                assert twb > prev
                prev = twb


class TestTypes:
    def test_site_bounds(self):
        with pytest.raises(DataError):
            SiteMeta("x", 99.0, 0.0, 0.0, 0.0)
        with pytest.raises(DataError):
            SiteMeta("x", 0.0, 0.0, 0.0, 15.0)

    def test_series_rejects_range_violation(self):
        with pytest.raises(DataError):
            make_series([101.0], variable="rel_humidity")

    def test_series_rejects_off_grid_timestamps(self):
        ts = [datetime(2001, 1, 1, 0), datetime(2001, 1, 1, 0, 30)]
        with pytest.raises(DataError):
            ClimateSeries("dry_bulb_temp", "hourly", ts, np.array([1.0, 2.0]))

    def test_criteria_validation(self):
        with pytest.raises(UsageError):
            SelectionCriteria(months=frozenset())
        with pytest.raises(UsageError):
            Predicate("wind_speed", 4.0, 2.0)
