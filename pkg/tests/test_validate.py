import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from climagen import validate
from climagen.climdata import SiteMeta
from climagen.errors import DataError
from climagen.validate import (
    check_extremes,
    check_twb_tdb,
    compare_monthly,
    full_report,
    ks_critical,
    ks_two_sample,
)


def brute_force_ks(x, y):
    xs, ys = np.sort(x), np.sort(y)
    pool = np.concatenate([xs, ys])
    d = 0.0
    for v in pool:
        fx = np.searchsorted(xs, v, side="right") / xs.size
        fy = np.searchsorted(ys, v, side="right") / ys.size
        d = max(d, abs(fx - fy))
    return d


def month_hours(year, month, n=200):
    start = datetime(year, month, 1)
    return [start + timedelta(hours=i) for i in range(n)]


class TestKs:
    def test_identity_zero(self):
        x = np.random.default_rng(0).normal(size=50)
        d, _, passed = ks_two_sample(x, x.copy())
        assert d == 0.0 and passed

    def test_disjoint_supports(self):
        d, _, passed = ks_two_sample([1.0, 2.0, 3.0, 3.5, 3.7], [4.0, 5.0, 6.0, 7.0, 8.0])
        assert d == 1.0 and not passed

    def test_critical_value_formula(self):
        assert ks_critical(0.05, 100, 100) == pytest.approx(0.1921, abs=1e-4)
        assert ks_critical(0.01, 100, 100) == pytest.approx(1.6276 * math.sqrt(0.02), abs=1e-4)

    def test_merge_scan_equals_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n, m = int(rng.integers(5, 25)), int(rng.integers(5, 25))
            x = np.round(rng.normal(size=n), 1)  # rounding forces ties
            y = np.round(rng.normal(size=m), 1)
            d, _, _ = ks_two_sample(x, y)
            assert d == pytest.approx(brute_force_ks(x, y), abs=1e-14)

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = rng.normal(size=30)
            y = rng.normal(loc=0.5, size=40)
            d1, _, _ = ks_two_sample(x, y)
            d2, _, _ = ks_two_sample(y, x)
            assert d1 == pytest.approx(d2, abs=1e-15)
            assert 0.0 <= d1 <= 1.0

    def test_tiny_samples_rejected(self):
        with pytest.raises(DataError):
            ks_two_sample([1.0, 2.0], [1.0, 2.0, 3.0, 4.0, 5.0])


class TestMonthly:
    def test_identical_passes(self):
        ts = month_hours(2001, 8)
        vals = np.random.default_rng(3).normal(20, 2, len(ts))
        out = compare_monthly(ts, vals, ts, vals)
        assert all(m.passed for m in out)
        assert out[0].d_mean == 0.0 and out[0].d_std == 0.0

    def test_one_sigma_shift_fails(self):
        ts = month_hours(2001, 8)
        vals = np.random.default_rng(4).normal(20, 2, len(ts))
        out = compare_monthly(ts, vals + 2.0, ts, vals)  # +1 sigma
        assert not out[0].passed

    def test_hand_deltas(self):
        ts = month_hours(2001, 8, n=100)
        rng = np.random.default_rng(5)
        ref = rng.normal(20, 2, 100)
        gen = (ref - ref.mean()) / ref.std(ddof=1) * 2.1 + 20.4
        out = compare_monthly(ts, gen, ts, ref)
        sigma = ref.std(ddof=1)
        assert out[0].d_mean == pytest.approx(abs(20.4 - ref.mean()), abs=1e-9)
        assert out[0].d_std == pytest.approx(abs(2.1 - sigma), abs=1e-9)

    def test_absent_month_noted(self):
        out = compare_monthly(
            month_hours(2001, 8), np.ones(200),
            month_hours(2001, 7), np.ones(200),
        )
        assert out[0].note and out[0].passed


class TestExtremes:
    def test_subset_range_passes(self):
        ts = month_hours(2001, 8, 500)
        rng = np.random.default_rng(6)
        ref = rng.normal(20, 2, 500)
        gen = np.clip(rng.normal(20, 2, 500), ref.min(), ref.max())
        assert check_extremes(ts, gen, ref, "dry_bulb_temp").passed

    def test_escaping_max_fails_with_timestamp(self):
        ts = month_hours(2001, 8, 100)
        ref = np.linspace(0, 10, 100)
        gen = np.linspace(0, 10, 100)
        gen[42] = 16.0  # ref_max + 0.5 * range
        res = check_extremes(ts, gen, ref, "dry_bulb_temp")
        assert not res.passed
        assert ts[42].isoformat() in res.details[0]

    def test_insolation_exceeding_day_length_fails(self):
        site = SiteMeta("equator", 0.0, 0.0, 0.0, 0.0)
        ts = [datetime(2001, 3, 21) + timedelta(days=i) for i in range(5)]
        ref = np.array([6.0, 7.0, 8.0, 9.0, 10.0])
        gen = np.array([6.0, 7.0, 13.0, 9.0, 10.0])  # 13 h on a ~12 h day
        res = check_extremes(ts, gen, ref, "insolation_hours", site=site)
        assert not res.passed
        assert any("day length" in d for d in res.details)


class TestTwbTdb:
    def test_coherent_passes(self):
        wet = np.array([10.0, 12.0, 14.0])
        dry = np.array([15.0, 12.0, 18.0])
        assert check_twb_tdb(wet, dry).passed

    def test_inverted_row_reported(self):
        wet = np.array([10.0, 19.0, 14.0])
        dry = np.array([15.0, 18.0, 18.0])
        res = check_twb_tdb(wet, dry)
        assert not res.passed and res.first_row == 1

    def test_equality_boundary_passes(self):
        t = np.array([20.0, 25.0])
        assert check_twb_tdb(t, t).passed


class TestFullReport:
    def table(self, seed, n=744, shift=0.0):
        ts = month_hours(2001, 8, n)
        rng = np.random.default_rng(seed)
        t = rng.normal(24, 2, n) + shift
        return ts, {
            "dry_bulb_temp": t,
            "wet_bulb_temp": t - np.abs(rng.normal(2, 0.3, n)),
            "wind_speed": np.abs(rng.normal(5, 1.5, n)) + shift,
        }

    def test_bootstrap_resample_mostly_passes(self):
        ref_ts, ref = self.table(0)
        passes = 0
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            ix = rng.integers(0, 744, 744)
            gen = {k: v[ix] for k, v in ref.items()}
            rep = full_report(ref_ts, gen, ref_ts, ref, alpha=0.05)
            passes += rep.passed
        assert passes >= 90

    def test_shifted_model_fails(self):
        ref_ts, ref = self.table(0)
        gen_ts, gen = self.table(0, shift=3.0)
        rep = full_report(gen_ts, gen, ref_ts, ref)
        assert not rep.passed

    def test_no_common_variables_errors(self):
        ts = month_hours(2001, 8, 50)
        with pytest.raises(DataError):
            full_report(ts, {"wind_speed": np.ones(50)}, ts, {"nebulosity": np.ones(50)})

    def test_identity_always_passes_and_renders(self):
        ts, cols = self.table(7)
        rep = full_report(ts, cols, ts, cols, coherence_repairs=0)
        assert rep.passed
        text = rep.render_text()
        assert "PASS" in text and "coherence audit" in text
        d = rep.to_dict()
        assert d["passed"] and d["coherence_repairs"] == 0

    def test_indicator_hook(self):
        ts, cols = self.table(8)
        rng = np.random.default_rng(9)
        rep = full_report(
            ts, cols, ts, cols,
            extra_indicators={"overheat_ratio": (rng.normal(size=100), rng.normal(3, 1, 100))},
        )
        assert "overheat_ratio" in rep.indicator_ks
        assert not rep.passed  # deliberately mismatched indicator

    def test_coherence_repairs_fail_report(self):
        ts, cols = self.table(10)
        rep = full_report(ts, cols, ts, cols, coherence_repairs=3)
        assert not rep.passed
