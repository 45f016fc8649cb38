import math

import numpy as np
import pytest

from climagen import corrfit
from climagen.climdata import Predicate, SelectionCriteria
from climagen.errors import DataError, FitError, UsageError

from conftest import make_series


def xy_series(x, y, xvar="global_rad", yvar="dry_bulb_temp"):
    return make_series(y, variable=yvar), [make_series(x, variable=xvar)]


class TestFit:
    def test_poly1_exact_line(self):
        resp, preds = xy_series([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        np.testing.assert_allclose(m.coefficients, [1.0, 2.0], atol=1e-10)
        assert m.diagnostics.r2 == pytest.approx(1.0)

    def test_angstrom_linear_constructed(self):
        s_frac = np.linspace(0.1, 0.9, 40)
        kt = 0.25 + 0.5 * s_frac
        resp = make_series(kt, variable="clearness_index")
        pred = make_series(s_frac, variable="sunshine_fraction")
        m = corrfit.fit_correlation("angstrom_linear", resp, [pred])
        np.testing.assert_allclose(m.coefficients, [0.25, 0.5], atol=1e-12)

    def test_poly2_interpolates_three_points(self):
        resp, preds = xy_series([0.0, 1.0, 2.0], [1.0, 2.0, 5.0])
        m = corrfit.fit_correlation("poly2", resp, preds)
        # solve 3x3 by hand: y = 1 + 0x + 1x^2 -> [1, 0, 1]
        np.testing.assert_allclose(m.coefficients, [1.0, 0.0, 1.0], atol=1e-9)
        assert m.diagnostics.residual_std == pytest.approx(0.0, abs=1e-9)

    def test_multilinear(self):
        rng = np.random.default_rng(0)
        x1, x2 = rng.uniform(0, 500, 60), rng.uniform(0, 10, 60)
        y = 2.0 + 1.5 * x1 - 0.5 * x2
        resp = make_series(y)
        preds = [make_series(x1, variable="global_rad"), make_series(x2, variable="wind_speed")]
        m = corrfit.fit_correlation("multilinear", resp, preds)
        np.testing.assert_allclose(m.coefficients, [2.0, 1.5, -0.5], atol=1e-8)

    def test_collinear_named(self):
        x = np.linspace(0, 1, 30)
        resp = make_series(2 * x)
        preds = [make_series(x, variable="global_rad"), make_series(2 * x, variable="wind_speed")]
        with pytest.raises(FitError, match="collinear"):
            corrfit.fit_correlation("multilinear", resp, preds)

    def test_insufficient_n(self):
        resp, preds = xy_series([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(FitError):
            corrfit.fit_correlation("poly2", resp, preds)  # 3 params, 2 points

    def test_criteria_conditioned_fit(self):
        # fit only where wind in [2, 4): the relationship differs elsewhere
        wind = np.array([1.0, 2.0, 3.0, 5.0] * 10)
        x = np.linspace(0, 1, 40)
        y = np.where((wind >= 2) & (wind < 4), 1.0 + 2.0 * x, 50.0)
        resp = make_series(y)
        preds = [make_series(x, variable="global_rad"), make_series(wind, variable="wind_speed")]
        crit = SelectionCriteria(predicates=(Predicate("wind_speed", 2.0, 4.0),))
        m = corrfit.fit_correlation(
            "multilinear", resp, preds, criteria=crit
        )
        assert m.diagnostics.n == 20
        pred_val = corrfit.evaluate(m, [0.5, 3.0])
        assert pred_val == pytest.approx(2.0, abs=1e-8)

    def test_unknown_template(self):
        resp, preds = xy_series([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        with pytest.raises(UsageError, match="unknown template"):
            corrfit.fit_correlation("klein_exact", resp, preds)

    def test_register_alias(self):
        corrfit.register_template("soler_like", 3, degree=1)
        assert "soler_like" in corrfit.TEMPLATES


class TestEvaluate:
    def fit_line(self):
        resp, preds = xy_series([0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0])
        return corrfit.fit_correlation("poly1", resp, preds)

    def test_intercept(self):
        assert corrfit.evaluate(self.fit_line(), [0.0]) == pytest.approx(1.0)

    def test_extrapolation_value(self):
        assert corrfit.evaluate(self.fit_line(), [3.0]) == pytest.approx(7.0)

    def test_zero_coefficients(self):
        m = self.fit_line()
        m.coefficients = np.zeros_like(m.coefficients)
        assert corrfit.evaluate(m, [123.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(UsageError):
            corrfit.evaluate(self.fit_line(), [1.0, 2.0])


class TestSignificance:
    def test_exact_fit_passes_with_infinite_f(self):
        resp, preds = xy_series([0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        assert math.isinf(m.diagnostics.f_statistic)
        sig = corrfit.significance(m)
        assert sig.f_pass

    def test_hand_t_statistic_five_points(self):
        # x=0..4, y=[1,3,4,7,9]: slope 2, SSE=0.8, se_b=sqrt(0.8/(3*10))
        resp, preds = xy_series([0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 4.0, 7.0, 9.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        assert m.coefficients[1] == pytest.approx(2.0, abs=1e-12)
        assert m.diagnostics.t_statistics[1] == pytest.approx(12.247448713915891, abs=1e-6)
        assert m.diagnostics.f_statistic == pytest.approx(150.0, abs=1e-6)
        assert m.diagnostics.r2 == pytest.approx(1.0 - 0.8 / 40.8, abs=1e-12)

    def test_pure_noise_rarely_significant(self):
        fails = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.uniform(0, 500, 100)
            y = rng.normal(size=100)
            m = corrfit.fit_correlation(
                "poly1", make_series(y), [make_series(x, variable="global_rad")]
            )
            if not corrfit.significance(m, alpha=0.05).f_pass:
                fails += 1
        assert fails >= 90


class TestProperties:
    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 10, 80)
        y = 3.0 + 0.5 * x + rng.normal(0, 0.3, 80)
        m = corrfit.fit_correlation("poly2", make_series(y), [make_series(x, variable="global_rad")])
        xs, ys = m.observations
        design = np.column_stack([np.ones(80), xs[:, 0], xs[:, 0] ** 2])
        resid = ys - design @ m.coefficients
        for j in range(design.shape[1]):
            dot = abs(float(resid @ design[:, j]))
            assert dot < 1e-8 * np.linalg.norm(resid) * np.linalg.norm(design[:, j]) + 1e-9

    def test_r2_invariant_under_predictor_rescaling(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 5, 60)
        y = 1.0 + 2.0 * x + rng.normal(0, 0.5, 60)
        m1 = corrfit.fit_correlation("poly1", make_series(y), [make_series(x, variable="global_rad")])
        m2 = corrfit.fit_correlation("poly1", make_series(y), [make_series(10 * x, variable="global_rad")])
        assert m1.diagnostics.r2 == pytest.approx(m2.diagnostics.r2, abs=1e-12)
        assert m2.coefficients[1] == pytest.approx(m1.coefficients[1] / 10.0, abs=1e-12)


class TestErrorSurface:
    def test_exact_fit_zero_residuals(self):
        resp, preds = xy_series([0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        rows = corrfit.error_surface(m, {"global_rad": np.array([0.0, 2.0, 4.0])})
        assert all(r["mean_rel_error_pct"] == pytest.approx(0.0, abs=1e-9) for r in rows if r["n"])

    def test_outlier_cell_hand_value(self):
        # y = 2x+1 except y(1) = 4; fit on clean points only via a fixed model
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([1.0, 4.0, 5.0, 7.0])
        clean = corrfit.fit_correlation(
            "poly1",
            make_series([1.0, 3.0, 5.0, 7.0]),
            [make_series(x, variable="global_rad")],
        )
        clean.observations = (x.reshape(-1, 1), y)
        rows = corrfit.error_surface(clean, {"global_rad": np.array([0.5, 1.5])})
        (cell,) = rows
        # model predicts 3 at x=1, observed 4: relative error (3-4)/4 = -25%
        assert cell["mean_rel_error_pct"] == pytest.approx(-25.0, abs=1e-9)

    def test_empty_cell_marked_missing(self):
        resp, preds = xy_series([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        rows = corrfit.error_surface(m, {"global_rad": np.array([10.0, 20.0])})
        assert rows[0]["mean_rel_error_pct"] is None and rows[0]["n"] == 0

    def test_requires_observations(self):
        resp, preds = xy_series([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        m = corrfit.fit_correlation("poly1", resp, preds)
        m.observations = None
        with pytest.raises(DataError):
            corrfit.error_surface(m, {"global_rad": np.array([0.0, 1.0])})
