"""Statistical validation of generated sequences against reference data:
two-sample Kolmogorov-Smirnov per variable, monthly mean/std comparison,
extreme-value checks, and the wet-bulb/dry-bulb coherence audit.

Asymptotic KS critical values are used: D_crit = c(alpha) sqrt((n+m)/(n m))
with c(alpha) = sqrt(-ln(alpha/2)/2), i.e. c(0.05) = 1.358, c(0.01) = 1.628.
Monthly tolerances default to 0.25 reference-sigma for both mean and std so
one setting serves every variable unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .climdata import VARIABLES
from .errors import DataError, UsageError
from .solargeo import solar_day

#: default monthly tolerances in units of the reference standard deviation
DEFAULT_TOL_MEAN_SIGMA = 0.25
DEFAULT_TOL_STD_SIGMA = 0.25

#: acceptable ratio of generated/reference tail exceedance frequencies
EXTREME_FREQ_FACTOR = 2.0


def ks_critical(alpha: float, n: int, m: int) -> float:
    """Asymptotic two-sample critical value c(alpha) sqrt((n+m)/(nm))."""
    if not 0.0 < alpha < 1.0:
        raise UsageError("alpha must lie in (0, 1)")
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


def ks_two_sample(x, y, alpha: float = 0.05) -> tuple[float, float, bool]:
    """Two-sided two-sample KS test by a merge scan over the pooled sample.

    Returns (D, critical value, pass). D is the sup of |Fx - Fy| over the
    pooled points, evaluated right-continuously so ties are handled exactly.
    """
    xs = np.sort(np.asarray(x, dtype=float))
    ys = np.sort(np.asarray(y, dtype=float))
    n, m = xs.size, ys.size
    if n < 5 or m < 5:
        raise DataError(f"KS needs >= 5 values per sample (got {n}, {m})")
    d = 0.0
    i = j = 0
    while i < n and j < m:
        v = min(xs[i], ys[j])
        while i < n and xs[i] <= v:
            i += 1
        while j < m and ys[j] <= v:
            j += 1
        d = max(d, abs(i / n - j / m))
    crit = ks_critical(alpha, n, m)
    return d, crit, d <= crit


@dataclass
class MonthlyDelta:
    month: int
    d_mean: float
    d_std: float
    tol_mean: float
    tol_std: float
    passed: bool
    note: str = ""


def compare_monthly(
    gen_ts: list[datetime],
    gen_vals: np.ndarray,
    ref_ts: list[datetime],
    ref_vals: np.ndarray,
    tol_mean_sigma: float = DEFAULT_TOL_MEAN_SIGMA,
    tol_std_sigma: float = DEFAULT_TOL_STD_SIGMA,
) -> list[MonthlyDelta]:
    """Per-month |mean| and |std| deltas against sigma-scaled tolerances.

    Months absent from the reference are skipped with a note rather than
    failed.
    """
    out: list[MonthlyDelta] = []
    gen_m = np.array([t.month for t in gen_ts])
    ref_m = np.array([t.month for t in ref_ts])
    for month in sorted(set(gen_m.tolist())):
        g = gen_vals[(gen_m == month) & np.isfinite(gen_vals)]
        r = ref_vals[(ref_m == month) & np.isfinite(ref_vals)] if ref_vals.size else np.array([])
        if r.size < 2:
            out.append(
                MonthlyDelta(month, math.nan, math.nan, 0, 0, True, "month absent from reference")
            )
            continue
        if g.size < 2:
            out.append(
                MonthlyDelta(month, math.nan, math.nan, 0, 0, True, "month empty in generated")
            )
            continue
        sigma = float(r.std(ddof=1))
        sigma = sigma if sigma > 0 else 1.0
        d_mean = abs(float(g.mean()) - float(r.mean()))
        d_std = abs(float(g.std(ddof=1)) - sigma)
        tol_m, tol_s = tol_mean_sigma * sigma, tol_std_sigma * sigma
        out.append(
            MonthlyDelta(
                month, d_mean, d_std, tol_m, tol_s,
                passed=d_mean <= tol_m and d_std <= tol_s,
            )
        )
    return out


@dataclass
class ExtremesResult:
    passed: bool
    details: list[str] = field(default_factory=list)


def check_extremes(
    gen_ts: list[datetime],
    gen_vals: np.ndarray,
    ref_vals: np.ndarray,
    variable: str,
    site=None,
) -> ExtremesResult:
    """Range check with a 10%-of-range margin, a 99th-percentile exceedance
    frequency cap at twice the reference frequency, and (for insolation with
    a site) the astronomical day-length bound."""
    g = gen_vals[np.isfinite(gen_vals)]
    r = ref_vals[np.isfinite(ref_vals)]
    if g.size == 0 or r.size == 0:
        raise DataError("extremes check needs non-empty samples")
    details: list[str] = []
    ok = True

    rng_ref = float(r.max() - r.min())
    margin = 0.1 * rng_ref
    if g.min() < r.min() - margin or g.max() > r.max() + margin:
        idx = int(np.nanargmax(gen_vals)) if g.max() > r.max() + margin else int(np.nanargmin(gen_vals))
        details.append(
            f"{variable}: generated range [{g.min():.4g}, {g.max():.4g}] escapes "
            f"reference [{r.min():.4g}, {r.max():.4g}] +/- {margin:.4g} "
            f"(first offender at {gen_ts[idx].isoformat()})"
        )
        ok = False

    p99 = float(np.percentile(r, 99.0))
    ref_freq = float((r > p99).mean())
    gen_freq = float((g > p99).mean())
    # small samples cannot estimate a 1% tail: need a few expected exceedances
    if ref_freq > 0 and g.size * ref_freq >= 5:
        if gen_freq > EXTREME_FREQ_FACTOR * ref_freq:
            details.append(
                f"{variable}: exceedance above the reference 99th percentile is "
                f"{gen_freq:.3%} vs reference {ref_freq:.3%} (cap x{EXTREME_FREQ_FACTOR})"
            )
            ok = False

    if variable == "insolation_hours" and site is not None:
        for ts, v in zip(gen_ts, gen_vals):
            if np.isfinite(v) and v > solar_day(site, ts.date()).day_length_s0 + 1e-9:
                details.append(
                    f"insolation {v:.2f} h exceeds day length at {ts.date().isoformat()}"
                )
                ok = False
                break
    return ExtremesResult(passed=ok, details=details)


@dataclass
class TwbTdbResult:
    passed: bool
    n_violations: int
    first_row: int | None = None


def check_twb_tdb(wet: np.ndarray, dry: np.ndarray) -> TwbTdbResult:
    """Row-wise wet_bulb <= dry_bulb + 1e-6."""
    both = np.isfinite(wet) & np.isfinite(dry)
    bad = both & (wet > dry + 1e-6)
    n_bad = int(bad.sum())
    first = int(np.nonzero(bad)[0][0]) if n_bad else None
    return TwbTdbResult(passed=n_bad == 0, n_violations=n_bad, first_row=first)


@dataclass
class VariableResult:
    variable: str
    ks_d: float
    ks_critical: float
    ks_pass: bool
    monthly: list[MonthlyDelta]
    monthly_pass: bool
    extremes: ExtremesResult


@dataclass
class ValidationReport:
    alpha: float
    variables: list[VariableResult]
    twb_tdb: TwbTdbResult | None
    coherence_repairs: int | None
    indicator_ks: dict[str, tuple[float, float, bool]]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "passed": self.passed,
            "variables": [
                {
                    "variable": v.variable,
                    "ks": {"d": v.ks_d, "critical": v.ks_critical, "pass": v.ks_pass},
                    "monthly": [
                        {
                            "month": m.month,
                            "d_mean": None if math.isnan(m.d_mean) else m.d_mean,
                            "d_std": None if math.isnan(m.d_std) else m.d_std,
                            "tol_mean": m.tol_mean,
                            "tol_std": m.tol_std,
                            "pass": m.passed,
                            "note": m.note,
                        }
                        for m in v.monthly
                    ],
                    "monthly_pass": v.monthly_pass,
                    "extremes": {"pass": v.extremes.passed, "details": v.extremes.details},
                }
                for v in self.variables
            ],
            "twb_tdb": None
            if self.twb_tdb is None
            else {
                "pass": self.twb_tdb.passed,
                "violations": self.twb_tdb.n_violations,
                "first_row": self.twb_tdb.first_row,
            },
            "coherence_repairs": self.coherence_repairs,
            "indicator_ks": {
                k: {"d": d, "critical": c, "pass": p}
                for k, (d, c, p) in self.indicator_ks.items()
            },
        }

    def render_text(self) -> str:
        lines = [f"validation report (alpha={self.alpha})"]
        for v in self.variables:
            lines.append(
                f"  {v.variable}: KS D={v.ks_d:.4f} crit={v.ks_critical:.4f} "
                f"[{'pass' if v.ks_pass else 'FAIL'}], monthly "
                f"[{'pass' if v.monthly_pass else 'FAIL'}], extremes "
                f"[{'pass' if v.extremes.passed else 'FAIL'}]"
            )
            for d in v.extremes.details:
                lines.append(f"    - {d}")
        if self.twb_tdb is not None:
            lines.append(
                f"  wet/dry bulb: {'pass' if self.twb_tdb.passed else 'FAIL'}"
                + (
                    f" ({self.twb_tdb.n_violations} rows, first at {self.twb_tdb.first_row})"
                    if self.twb_tdb.n_violations
                    else ""
                )
            )
        for name, (d, c, p) in self.indicator_ks.items():
            lines.append(f"  indicator {name}: KS D={d:.4f} crit={c:.4f} [{'pass' if p else 'FAIL'}]")
        if self.coherence_repairs is not None:
            lines.append(
                f"  coherence audit: {self.coherence_repairs} repair(s) "
                f"[{'pass' if self.coherence_repairs == 0 else 'FAIL'}]"
            )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def full_report(
    gen_ts: list[datetime],
    gen_cols: dict[str, np.ndarray],
    ref_ts: list[datetime],
    ref_cols: dict[str, np.ndarray],
    alpha: float = 0.05,
    site=None,
    tol_mean_sigma: float = DEFAULT_TOL_MEAN_SIGMA,
    tol_std_sigma: float = DEFAULT_TOL_STD_SIGMA,
    extra_indicators: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    coherence_repairs: int | None = None,
) -> ValidationReport:
    """Run the whole battery on the common variables of two tables.

    `extra_indicators` is the hook for externally computed indicator series
    (e.g. building-simulation outputs); each (generated, reference) pair goes
    through the same two-sample KS machinery. `coherence_repairs` is the
    caller-supplied audit count for the generated table; any repair fails
    the report.
    """
    common = [v for v in gen_cols if v in ref_cols and v in VARIABLES]
    if not common:
        raise DataError("no common variables between generated and reference tables")

    results: list[VariableResult] = []
    all_ok = True
    for var in sorted(common):
        g, r = gen_cols[var], ref_cols[var]
        gv, rv = g[np.isfinite(g)], r[np.isfinite(r)]
        if gv.size < 5 or rv.size < 5:
            continue
        d, crit, ks_ok = ks_two_sample(gv, rv, alpha=alpha)
        monthly = compare_monthly(gen_ts, g, ref_ts, r, tol_mean_sigma, tol_std_sigma)
        monthly_ok = all(m.passed for m in monthly)
        ext = check_extremes(gen_ts, g, r, var, site=site)
        results.append(
            VariableResult(
                variable=var, ks_d=d, ks_critical=crit, ks_pass=ks_ok,
                monthly=monthly, monthly_pass=monthly_ok, extremes=ext,
            )
        )
        all_ok = all_ok and ks_ok and monthly_ok and ext.passed
    if not results:
        raise DataError("common variables had too few values to validate")

    twb = None
    if "wet_bulb_temp" in gen_cols and "dry_bulb_temp" in gen_cols:
        twb = check_twb_tdb(gen_cols["wet_bulb_temp"], gen_cols["dry_bulb_temp"])
        all_ok = all_ok and twb.passed

    indicator_ks: dict[str, tuple[float, float, bool]] = {}
    for name, (gi, ri) in (extra_indicators or {}).items():
        gi = np.asarray(gi, dtype=float)
        ri = np.asarray(ri, dtype=float)
        d, crit, ok = ks_two_sample(gi[np.isfinite(gi)], ri[np.isfinite(ri)], alpha=alpha)
        indicator_ks[name] = (d, crit, ok)
        all_ok = all_ok and ok

    if coherence_repairs is not None:
        all_ok = all_ok and coherence_repairs == 0

    return ValidationReport(
        alpha=alpha,
        variables=results,
        twb_tdb=twb,
        coherence_repairs=coherence_repairs,
        indicator_ks=indicator_ks,
        passed=all_ok,
    )
