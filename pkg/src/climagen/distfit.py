"""Distribution laws for climate variables: Weibull wind speeds, the tropical
clearness-index law of Saunier, and Gaussian temperature/humidity, with
chi-square goodness of fit and seeded sampling.

The Saunier density is used in its normalized product form

    P(x) = C1 * x * (1 - x) * exp(g * x),   x = Kt / Ktmax in [0, 1]

whose normalization constant and mean have the closed forms

    C1(g)    = g^3 / ((g - 2) e^g + g + 2)
    xmoy(g)  = ((g^2 - 4g + 6) e^g - 2g - 6) / (g ((g - 2) e^g + g + 2))

Both brackets vanish like g^3 (resp. g^4) at g = 0, so small |g| is handled
through their Taylor series:

    (g-2)e^g + g + 2        = sum_{n>=3} (1/(n-1)! - 2/n!) g^n
    (g^2-4g+6)e^g - 2g - 6  = sum_{n>=4} (1/(n-2)! - 4/(n-1)! + 6/n!) g^n

which give the g -> 0 limits C1 = 6, xmoy = 1/2. A literature variant writes
the density with an (x - xmoy) factor; that printed form is exposed for
comparison only, since it is signed and does not normalize.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln, ndtri

from .climdata import ClimateSeries
from .errors import DataError, FitError, UsageError

# seam between series and closed-form evaluation of the Saunier brackets
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 30
# closed forms get e^g factored out beyond this to avoid overflow
_LARGE_GAMMA = 30.0
_GAMMA_BRACKET = 1e4


@dataclass(frozen=True)
class WeibullParams:
    k: float  # shape
    c: float  # scale, same units as the variable

    def __post_init__(self):
        if self.k <= 0 or self.c <= 0:
            raise DataError(f"Weibull parameters must be positive (k={self.k}, c={self.c})")

    def to_dict(self) -> dict:
        return {"k": self.k, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "WeibullParams":
        return cls(k=float(d["k"]), c=float(d["c"]))


@dataclass(frozen=True)
class SaunierParams:
    gamma1: float
    c1: float
    x_moy: float
    kt_moy: float
    kt_max: float

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1, "c1": self.c1, "x_moy": self.x_moy,
            "kt_moy": self.kt_moy, "kt_max": self.kt_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SaunierParams":
        return cls(*(float(d[k]) for k in ("gamma1", "c1", "x_moy", "kt_moy", "kt_max")))


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise DataError(f"sigma must be >= 0, got {self.sigma}")

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianParams":
        return cls(mu=float(d["mu"]), sigma=float(d["sigma"]))


@dataclass
class GofResult:
    statistic: float
    dof: int
    p_value: float
    passed: bool
    alpha: float


# ---------------------------------------------------------------------------
# Weibull

def _weibull_values(sample) -> np.ndarray:
    if isinstance(sample, ClimateSeries):
        vals = sample.non_missing()
    else:
        vals = np.asarray(sample, dtype=float)
        vals = vals[np.isfinite(vals)]
    return vals


def weibull_fit(sample) -> WeibullParams:
    """Maximum-likelihood Weibull fit.

    The shape k solves the profile-likelihood equation

        sum(v^k ln v)/sum(v^k) - 1/k - mean(ln v) = 0

    by safeguarded Newton with a bisection fallback (|dk| < 1e-8), then
    c = (sum(v^k)/n)^(1/k). Zeros are excluded from the likelihood (log v);
    negative values are rejected.
    """
    vals = _weibull_values(sample)
    if vals.size and vals.min() < 0:
        raise DataError("wind-speed sample contains negative values")
    pos = vals[vals > 0]
    if np.unique(pos).size < 2:
        raise FitError("degenerate sample: needs >= 2 distinct positive values")
    if vals.size < 30:
        warnings.warn(f"Weibull fit on small sample (n={vals.size})", stacklevel=2)

    logv = np.log(pos)
    mean_log = logv.mean()

    def g(k: float) -> float:
        w = np.power(pos, k)
        return float((w * logv).sum() / w.sum() - 1.0 / k - mean_log)

    # g is strictly increasing in k; expand a bracket around k=1
    lo, hi = 1.0, 1.0
    while g(lo) > 0 and lo > 1e-8:
        lo *= 0.5
    while g(hi) < 0 and hi < 1e4:
        hi *= 2.0
    if g(lo) > 0 or g(hi) < 0:
        raise FitError("Weibull shape bracket not found")

    k = 0.5 * (lo + hi)
    for _ in range(200):
        w = np.power(pos, k)
        s0, s1 = w.sum(), (w * logv).sum()
        gk = s1 / s0 - 1.0 / k - mean_log
        if gk > 0:
            hi = k
        else:
            lo = k
        # d/dk of the profile equation: weighted variance of ln v plus 1/k^2
        var_w = (w * logv * logv).sum() / s0 - (s1 / s0) ** 2
        dg = var_w + 1.0 / (k * k)
        k_new = k - gk / dg
        if not lo < k_new < hi:  # Newton left the bracket: bisect
            k_new = 0.5 * (lo + hi)
        if abs(k_new - k) < 1e-8:
            k = k_new
            break
        k = k_new
    c = float(np.power(np.power(pos, k).mean(), 1.0 / k))
    return WeibullParams(k=k, c=c)


def weibull_pdf(params: WeibullParams, v) -> np.ndarray | float:
    """f(v) = (k/c) (v/c)^(k-1) exp(-(v/c)^k) for v >= 0."""
    k, c = params.k, params.c
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise UsageError("wind speed must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = v / c
        out = (k / c) * np.power(t, k - 1.0) * np.exp(-np.power(t, k))
    # v = 0: 1/c when k = 1, 0 when k > 1, diverges when k < 1
    if k == 1.0:
        out = np.where(v == 0.0, 1.0 / c, out)
    elif k > 1.0:
        out = np.where(v == 0.0, 0.0, out)
    else:
        out = np.where(v == 0.0, np.inf, out)
    return out if out.ndim else float(out)


def weibull_cdf(params: WeibullParams, v) -> np.ndarray | float:
    v = np.asarray(v, dtype=float)
    out = np.where(v <= 0.0, 0.0, 1.0 - np.exp(-np.power(np.maximum(v, 0.0) / params.c, params.k)))
    return out if out.ndim else float(out)


def weibull_mean(params: WeibullParams) -> float:
    return params.c * math.exp(gammaln(1.0 + 1.0 / params.k))


def _weibull_sample(params: WeibullParams, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(n)
    return params.c * np.power(-np.log1p(-u), 1.0 / params.k)


# ---------------------------------------------------------------------------
# Saunier clearness-index law

def _series_bracket_b(g: float) -> float:
    """((g-2)e^g + g + 2) / g^3 via Taylor series, accurate for small |g|."""
    acc, term = 0.0, 0.0
    for m in range(_SERIES_TERMS):
        n = m + 3
        b_n = 1.0 / math.factorial(n - 1) - 2.0 / math.factorial(n)
        term = b_n * g**m
        acc += term
    return acc


def _series_bracket_a(g: float) -> float:
    """((g^2-4g+6)e^g - 2g - 6) / g^4 via Taylor series."""
    acc = 0.0
    for m in range(_SERIES_TERMS):
        n = m + 4
        a_n = (
            1.0 / math.factorial(n - 2)
            - 4.0 / math.factorial(n - 1)
            + 6.0 / math.factorial(n)
        )
        acc += a_n * g**m
    return acc


def c1_of_gamma(g: float) -> float:
    """Normalization constant C1(g) = g^3 / ((g-2)e^g + g + 2)."""
    if abs(g) <= _SERIES_CUTOFF:
        return 1.0 / _series_bracket_b(g)
    if g > _LARGE_GAMMA:
        # factor e^g out of the bracket to dodge overflow
        return g**3 * math.exp(-g) / ((g - 2.0) + (g + 2.0) * math.exp(-g))
    return g**3 / ((g - 2.0) * math.exp(g) + g + 2.0)


def x_moy_of_gamma(g: float) -> float:
    """Mean of the normalized clearness index as a function of the shape g.

    Strictly increasing, with x_moy(0) = 1/2 and range (0, 1).
    """
    if abs(g) <= _SERIES_CUTOFF:
        return _series_bracket_a(g) / _series_bracket_b(g)
    if g > _LARGE_GAMMA:
        eg = math.exp(-g)
        num = (g * g - 4.0 * g + 6.0) - (2.0 * g + 6.0) * eg
        den = g * ((g - 2.0) + (g + 2.0) * eg)
        return num / den
    eg = math.exp(g)
    return ((g * g - 4.0 * g + 6.0) * eg - 2.0 * g - 6.0) / (g * ((g - 2.0) * eg + g + 2.0))


def saunier_solve(kt_moy: float, kt_max: float, tol: float = 1e-8, max_iter: int = 200) -> SaunierParams:
    """Find the shape gamma1 reproducing x_moy = kt_moy/kt_max by bisection.

    x_moy(gamma) is monotone increasing, so a sign-change bracket always
    pins the root; |dgamma| < tol on exit.
    """
    if not 0.0 < kt_moy < kt_max <= 1.0:
        raise DataError(f"need 0 < kt_moy < kt_max <= 1, got ({kt_moy}, {kt_max})")
    target = kt_moy / kt_max
    lo, hi = -_GAMMA_BRACKET, _GAMMA_BRACKET
    if not x_moy_of_gamma(lo) < target < x_moy_of_gamma(hi):
        raise FitError(
            f"x_moy target {target:.6f} too extreme for the attainable range "
            f"({x_moy_of_gamma(lo):.5f}, {x_moy_of_gamma(hi):.5f})"
        )
    g = 0.0
    for _ in range(max_iter):
        g = 0.5 * (lo + hi)
        if x_moy_of_gamma(g) < target:
            lo = g
        else:
            hi = g
        if hi - lo < tol:
            break
    else:
        raise FitError(f"gamma search did not converge in {max_iter} iterations")
    g = 0.5 * (lo + hi)
    return SaunierParams(
        gamma1=g, c1=c1_of_gamma(g), x_moy=x_moy_of_gamma(g), kt_moy=kt_moy, kt_max=kt_max
    )


def saunier_fit(kt_sample, kt_max: float | None = None) -> SaunierParams:
    """Fit from a clearness-index sample: kt_moy from the mean, kt_max from
    the 98th percentile unless supplied by the user."""
    vals = _weibull_values(kt_sample)
    if vals.size < 2:
        raise FitError("clearness-index sample too small")
    if kt_max is None:
        kt_max = min(float(np.percentile(vals, 98.0)), 1.0)
    return saunier_solve(float(vals.mean()), kt_max)


def saunier_pdf(params: SaunierParams, x, form: str = "product") -> np.ndarray | float:
    """Density of the normalized clearness index on [0, 1].

    form="product" is the normalized law C1 x (1-x) e^(gx). form="printed"
    evaluates the signed literature variant C1 (x - x_moy) e^(gx) verbatim;
    it is not a probability density and is never normalized here.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise UsageError("normalized clearness index must lie in [0, 1]")
    g = params.gamma1
    if form == "printed":
        out = params.c1 * (x - params.x_moy) * np.exp(g * x)
        return out if out.ndim else float(out)
    if form != "product":
        raise UsageError(f"unknown density form {form!r}")
    if g > _LARGE_GAMMA:
        # C1 e^(gx) = g^3 e^(g(x-1)) / ((g-2) + (g+2)e^-g)
        scale = g**3 / ((g - 2.0) + (g + 2.0) * math.exp(-g))
        out = scale * x * (1.0 - x) * np.exp(g * (x - 1.0))
    else:
        out = params.c1 * x * (1.0 - x) * np.exp(g * x)
    return out if out.ndim else float(out)


def _saunier_cdf_scalar(g: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if abs(g) <= _SERIES_CUTOFF:
        # int_0^x t(1-t)e^(gt) dt = sum_m g^m/m! (x^(m+2)/(m+2) - x^(m+3)/(m+3))
        num = 0.0
        for m in range(_SERIES_TERMS):
            num += g**m / math.factorial(m) * (
                x ** (m + 2) / (m + 2) - x ** (m + 3) / (m + 3)
            )
        return num / _series_bracket_b(g)
    if g > _LARGE_GAMMA:
        eg = math.exp(-g)
        num = math.exp(g * (x - 1.0)) * (g * g * x * (1.0 - x) + 2.0 * g * x - g - 2.0) + (g + 2.0) * eg
        den = (g - 2.0) + (g + 2.0) * eg
        return min(max(num / den, 0.0), 1.0)
    num = math.exp(g * x) * (g * g * x * (1.0 - x) + 2.0 * g * x - g - 2.0) + g + 2.0
    den = (g - 2.0) * math.exp(g) + g + 2.0
    return min(max(num / den, 0.0), 1.0)


def saunier_cdf(params: SaunierParams, x) -> np.ndarray | float:
    """CDF of the normalized clearness index (series form near g = 0)."""
    xs = np.asarray(x, dtype=float)
    out = np.vectorize(lambda t: _saunier_cdf_scalar(params.gamma1, t))(xs)
    return out if out.ndim else float(out)


def saunier_mode(params: SaunierParams) -> float:
    """Interior maximum of x(1-x)e^(gx): the stable root 2/(2 - g + sqrt(g^2+4))."""
    g = params.gamma1
    return 2.0 / (2.0 - g + math.sqrt(g * g + 4.0))


def _saunier_sample(params: SaunierParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampling under a flat envelope at the analytic density maximum."""
    peak = float(saunier_pdf(params, saunier_mode(params)))
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 64)
        x = rng.random(m)
        v = rng.random(m) * peak
        acc = x[v <= saunier_pdf(params, x)]
        take = min(acc.size, n - filled)
        out[filled : filled + take] = acc[:take]
        filled += take
    return out


# ---------------------------------------------------------------------------
# Gaussian

def gaussian_fit(sample) -> GaussianParams:
    vals = _weibull_values(sample)
    if vals.size < 2:
        raise FitError("Gaussian fit needs at least 2 values")
    return GaussianParams(mu=float(vals.mean()), sigma=float(vals.std(ddof=1)))


def gaussian_pdf(params: GaussianParams, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if params.sigma == 0.0:
        out = np.where(x == params.mu, np.inf, 0.0)
    else:
        z = (x - params.mu) / params.sigma
        out = np.exp(-0.5 * z * z) / (params.sigma * math.sqrt(2.0 * math.pi))
    return out if out.ndim else float(out)


def gaussian_cdf(params: GaussianParams, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if params.sigma == 0.0:
        out = np.where(x < params.mu, 0.0, 1.0)
    else:
        out = stats.norm.cdf(x, loc=params.mu, scale=params.sigma)
    return out if out.ndim else float(out)


def _gaussian_sample(params: GaussianParams, n: int, rng: np.random.Generator) -> np.ndarray:
    u = np.clip(rng.random(n), 1e-300, 1.0 - 1e-16)
    return params.mu + params.sigma * ndtri(u)


# ---------------------------------------------------------------------------
# dispatch

DistParams = WeibullParams | SaunierParams | GaussianParams

#: fitted-parameter count per law, for chi-square degrees of freedom
_N_FITTED = {WeibullParams: 2, SaunierParams: 1, GaussianParams: 2}


def pdf(params: DistParams, x):
    if isinstance(params, WeibullParams):
        return weibull_pdf(params, x)
    if isinstance(params, SaunierParams):
        return saunier_pdf(params, x)
    if isinstance(params, GaussianParams):
        return gaussian_pdf(params, x)
    raise UsageError(f"unsupported distribution params {type(params).__name__}")


def cdf(params: DistParams, x):
    if isinstance(params, WeibullParams):
        return weibull_cdf(params, x)
    if isinstance(params, SaunierParams):
        return saunier_cdf(params, x)
    if isinstance(params, GaussianParams):
        return gaussian_cdf(params, x)
    raise UsageError(f"unsupported distribution params {type(params).__name__}")


def sample_dist(params: DistParams, n: int, seed: int) -> np.ndarray:
    """Draw n values, deterministic under the seed. Inverse-CDF for Weibull
    and Gaussian, rejection for the clearness-index law."""
    if n < 1:
        raise UsageError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(params, WeibullParams):
        return _weibull_sample(params, n, rng)
    if isinstance(params, SaunierParams):
        return _saunier_sample(params, n, rng)
    if isinstance(params, GaussianParams):
        return _gaussian_sample(params, n, rng)
    raise UsageError(f"unsupported distribution params {type(params).__name__}")


# ---------------------------------------------------------------------------
# goodness of fit

def chi2_from_counts(observed, expected, n_fitted: int, alpha: float = 0.05) -> GofResult:
    """Pearson statistic from pre-binned counts; dof = bins - 1 - n_fitted."""
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    if obs.shape != exp.shape or obs.size < 2:
        raise UsageError("need >= 2 aligned bins")
    dof = obs.size - 1 - n_fitted
    if dof < 1:
        raise DataError(f"not enough bins for {n_fitted} fitted parameters")
    statistic = float(((obs - exp) ** 2 / exp).sum())
    p = float(stats.chi2.sf(statistic, dof))
    return GofResult(statistic=statistic, dof=dof, p_value=p, passed=p >= alpha, alpha=alpha)


def chi2_gof(sample, params: DistParams, n_bins: int = 12, alpha: float = 0.05) -> GofResult:
    """Chi-square comparison of a sample against a fitted law.

    Equal-width bins over the sample range, outermost bins widened to cover
    the full support; tail bins are merged until every expected count is at
    least 5. Errors out if fewer than 2 bins survive.
    """
    vals = _weibull_values(sample)
    if vals.size < 10:
        raise DataError("chi-square needs at least 10 observations")
    if n_bins < 2:
        raise UsageError("n_bins must be >= 2")
    edges = np.linspace(vals.min(), vals.max(), n_bins + 1)
    obs, _ = np.histogram(vals, bins=edges)
    cdf_at = np.asarray(cdf(params, edges), dtype=float)
    cdf_at[0], cdf_at[-1] = 0.0, 1.0  # stretch outer bins to the full support
    exp = np.diff(cdf_at) * vals.size

    obs_l, exp_l = list(obs.astype(float)), list(exp)
    # merge from the low tail, then the high tail, until expected >= 5
    while len(exp_l) > 1 and exp_l[0] < 5.0:
        exp_l[1] = exp_l[0] + exp_l[1]
        obs_l[1] = obs_l[0] + obs_l[1]
        exp_l.pop(0)
        obs_l.pop(0)
    while len(exp_l) > 1 and exp_l[-1] < 5.0:
        exp_l[-2] = exp_l[-2] + exp_l[-1]
        obs_l[-2] = obs_l[-2] + obs_l[-1]
        exp_l.pop()
        obs_l.pop()
    # interior bins can still fall short where the density is thin; fold each
    # into its smaller neighbor
    while len(exp_l) > 2 and min(exp_l) < 5.0:
        i = int(np.argmin(exp_l))
        j = i + 1 if i == 0 else i - 1 if i == len(exp_l) - 1 else (
            i - 1 if exp_l[i - 1] <= exp_l[i + 1] else i + 1
        )
        lo, hi = min(i, j), max(i, j)
        exp_l[lo] = exp_l[lo] + exp_l[hi]
        obs_l[lo] = obs_l[lo] + obs_l[hi]
        exp_l.pop(hi)
        obs_l.pop(hi)
    if len(exp_l) < 2 or min(exp_l) < 5.0:
        raise DataError("fewer than 2 usable bins after merging")
    return chi2_from_counts(obs_l, exp_l, _N_FITTED[type(params)], alpha=alpha)
