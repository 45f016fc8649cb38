"""Conditional correlation functions: linear-in-parameters regression templates
fitted by least squares on criteria-filtered data, with F and Student-t
significance tests.

Shipped templates are the generic shapes (linear, polynomial up to degree 3,
multilinear); classical solar correlations are registered as named aliases of
these shapes (e.g. angstrom_linear for the sunshine-fraction / clearness-index
line). Fidelity to each original publication's coefficients is not claimed;
fits are always re-estimated on the user's data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .climdata import ClimateSeries, SelectionCriteria, select
from .errors import DataError, FitError, UsageError


@dataclass(frozen=True)
class Template:
    template_id: str
    n_predictors: int | None  # None = any number
    degree: int  # polynomial degree per predictor (1 for multilinear)

    def param_names(self, n_pred: int) -> list[str]:
        if self.degree == 1:
            return ["intercept"] + [f"b{i + 1}" for i in range(n_pred)]
        return ["intercept"] + [f"b{d}" for d in range(1, self.degree + 1)]

    def design(self, x: np.ndarray) -> np.ndarray:
        """Design matrix for predictor columns x (n x n_pred)."""
        n = x.shape[0]
        if self.degree == 1:
            return np.column_stack([np.ones(n), x])
        cols = [np.ones(n)] + [x[:, 0] ** d for d in range(1, self.degree + 1)]
        return np.column_stack(cols)


TEMPLATES: dict[str, Template] = {}


def register_template(template_id: str, n_predictors: int | None, degree: int = 1) -> Template:
    """Register a template id (or a named alias of a generic shape)."""
    if degree > 1 and n_predictors != 1:
        raise UsageError("polynomial templates take exactly one predictor")
    t = Template(template_id, n_predictors, degree)
    TEMPLATES[template_id] = t
    return t


register_template("poly1", 1, degree=1)
register_template("poly2", 1, degree=2)
register_template("poly3", 1, degree=3)
register_template("multilinear", None, degree=1)
# classical named forms mapped onto the generic shapes
register_template("angstrom_linear", 1, degree=1)  # Kt = a + b * S/S0 and inverse


@dataclass
class FitDiagnostics:
    r2: float
    f_statistic: float
    t_statistics: list[float]
    residual_std: float
    n: int


@dataclass
class CorrelationModel:
    template_id: str
    response: str
    predictors: list[str]
    coefficients: np.ndarray
    criteria: SelectionCriteria
    diagnostics: FitDiagnostics
    observations: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "response": self.response,
            "predictors": list(self.predictors),
            "coefficients": [float(c) for c in self.coefficients],
            "criteria": self.criteria.to_dict(),
            "diagnostics": {
                "r2": self.diagnostics.r2,
                "f_statistic": self.diagnostics.f_statistic,
                "t_statistics": list(self.diagnostics.t_statistics),
                "residual_std": self.diagnostics.residual_std,
                "n": self.diagnostics.n,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationModel":
        diag = d["diagnostics"]
        return cls(
            template_id=d["template_id"],
            response=d["response"],
            predictors=list(d["predictors"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            criteria=SelectionCriteria.from_dict(d["criteria"]),
            diagnostics=FitDiagnostics(
                r2=float(diag["r2"]),
                f_statistic=float(diag["f_statistic"]),
                t_statistics=[float(t) for t in diag["t_statistics"]],
                residual_std=float(diag["residual_std"]),
                n=int(diag["n"]),
            ),
        )


@dataclass
class SignificanceResult:
    f_pass: bool
    f_p_value: float
    t_pass: list[bool]
    t_p_values: list[float]
    alpha: float


def _template(template_id: str) -> Template:
    if template_id not in TEMPLATES:
        raise UsageError(
            f"unknown template {template_id!r}; known: {sorted(TEMPLATES)}"
        )
    return TEMPLATES[template_id]


def fit_correlation(
    template_id: str,
    response: ClimateSeries,
    predictors: list[ClimateSeries],
    criteria: SelectionCriteria | None = None,
) -> CorrelationModel:
    """Least-squares fit of a template on criteria-filtered, aligned series.

    Solved through a column-pivoted QR factorization; a rank-deficient design
    is rejected naming the collinear columns instead of returning silently
    unstable coefficients.
    """
    tpl = _template(template_id)
    if tpl.n_predictors is not None and len(predictors) != tpl.n_predictors:
        raise UsageError(
            f"template {template_id!r} takes {tpl.n_predictors} predictor(s), "
            f"got {len(predictors)}"
        )
    if not predictors:
        raise UsageError("need at least one predictor series")
    for p in predictors:
        if p.timestamps != response.timestamps:
            raise DataError(f"predictor {p.variable!r} not aligned with response")

    criteria = criteria or SelectionCriteria()
    companions = [*predictors, response]
    resp = select(response, criteria, companions=companions)
    preds = [select(p, criteria, companions=companions) for p in predictors]

    y = resp.values
    x = np.column_stack([p.values for p in preds]) if preds else np.empty((y.size, 0))
    ok = np.isfinite(y) & np.all(np.isfinite(x), axis=1)
    y, x = y[ok], x[ok]

    n_params = len(tpl.param_names(len(predictors)))
    if y.size < n_params:
        raise FitError(
            f"only {y.size} usable observations for {n_params} parameters"
        )
    if y.size < n_params + 2:
        # exact interpolation is allowed; inference diagnostics degenerate
        warnings.warn(
            f"only {y.size} observations for {n_params} parameters; "
            "significance tests will be degenerate",
            stacklevel=2,
        )

    a = tpl.design(x)
    q, r, piv = linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(a.shape) * np.finfo(float).eps if diag[0] > 0 else 0.0
    rank = int((diag > tol).sum())
    names = tpl.param_names(len(predictors))
    if rank < a.shape[1]:
        bad = [names[j] for j in piv[rank:]]
        raise FitError(f"rank-deficient design: collinear column(s) {bad}")

    beta_piv = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty_like(beta_piv)
    beta[piv] = beta_piv

    fitted = a @ beta
    resid = y - fitted
    n, p_prime = y.size, a.shape[1] - 1
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if sst == 0.0 and sse < 1e-12 else (1.0 - sse / sst if sst > 0 else 0.0)
    r2 = min(max(r2, 0.0), 1.0)
    dof = n - p_prime - 1
    sigma2 = sse / dof if dof > 0 else 0.0

    # covariance of beta through the unpivoted R factor
    r_inv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    cov_piv = r_inv @ r_inv.T
    cov = np.empty_like(cov_piv)
    cov[np.ix_(piv, piv)] = cov_piv
    se = np.sqrt(np.maximum(np.diag(cov) * sigma2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(
            se > 0, beta / se, np.where(beta == 0.0, 0.0, np.inf * np.sign(beta))
        )

    diag_out = FitDiagnostics(
        r2=r2,
        f_statistic=_f_statistic(r2, p_prime, n),
        t_statistics=[float(t) for t in t_stats],
        residual_std=math.sqrt(sigma2),
        n=n,
    )
    return CorrelationModel(
        template_id=template_id,
        response=response.variable,
        predictors=[p.variable for p in predictors],
        coefficients=beta,
        criteria=criteria,
        diagnostics=diag_out,
        observations=(x, y),
    )


def _f_statistic(r2: float, p_prime: int, n: int) -> float:
    if r2 >= 1.0:
        return math.inf
    denom_dof = n - p_prime - 1
    if denom_dof <= 0 or p_prime == 0:
        return 0.0
    return (r2 / p_prime) / ((1.0 - r2) / denom_dof)


def evaluate(model: CorrelationModel, predictor_values) -> np.ndarray | float:
    """Template evaluated at the fitted coefficients.

    Accepts one predictor vector or an (n, n_pred) batch. No extrapolation
    guard by default.
    """
    tpl = _template(model.template_id)
    arr = np.asarray(predictor_values, dtype=float)
    single = arr.ndim <= 1
    x = np.atleast_2d(arr)
    if x.shape[1] != len(model.predictors):
        raise UsageError(
            f"expected {len(model.predictors)} predictor value(s), got shape {x.shape}"
        )
    out = tpl.design(x) @ model.coefficients
    return float(out[0]) if single else out


def significance(model: CorrelationModel, alpha: float = 0.05) -> SignificanceResult:
    """F test on the regression plus per-coefficient Student-t tests.

    F = (r2/p')/((1-r2)/(n-p'-1)); an exact fit reports F = +inf and passes.
    """
    d = model.diagnostics
    p_prime = len(model.coefficients) - 1
    dof = d.n - p_prime - 1
    if dof <= 0:
        raise DataError("not enough observations for significance testing")
    if math.isinf(d.f_statistic):
        f_p = 0.0
    else:
        f_p = float(stats.f.sf(d.f_statistic, p_prime, dof))
    t_ps = [
        0.0 if math.isinf(t) else float(2.0 * stats.t.sf(abs(t), dof))
        for t in d.t_statistics
    ]
    return SignificanceResult(
        f_pass=f_p < alpha,
        f_p_value=f_p,
        t_pass=[p < alpha for p in t_ps],
        t_p_values=t_ps,
        alpha=alpha,
    )


def error_surface(
    model: CorrelationModel,
    predictor_grid: dict[str, np.ndarray],
) -> list[dict]:
    """Mean relative error (%) of the fit per grid cell of chosen predictors.

    `predictor_grid` maps predictor names to bin edge arrays. Cells without
    observations are reported with a missing (None) error. Rows are
    CSV-exportable plot data: one dict per cell with the cell midpoints and
    the mean of (fitted - observed)/|observed| in percent.
    """
    if model.observations is None:
        raise DataError("error_surface needs the fitted model's retained observations")
    for name in predictor_grid:
        if name not in model.predictors:
            raise UsageError(f"{name!r} is not a predictor of this model")
    x, y = model.observations
    fitted = np.atleast_1d(evaluate(model, x))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(y != 0, (fitted - y) / np.abs(y) * 100.0, np.nan)

    axes = list(predictor_grid.items())
    cols = {name: x[:, model.predictors.index(name)] for name, _ in axes}

    def cells(level: int, mask: np.ndarray, mids: list[float]):
        if level == len(axes):
            sel = rel[mask]
            sel = sel[np.isfinite(sel)]
            row = {name: mid for (name, _), mid in zip(axes, mids)}
            row["mean_rel_error_pct"] = float(sel.mean()) if sel.size else None
            row["n"] = int(mask.sum())
            yield row
            return
        name, edges = axes[level]
        for i in range(len(edges) - 1):
            lo, hi = edges[i], edges[i + 1]
            sub = mask & (cols[name] >= lo) & (cols[name] < hi)
            yield from cells(level + 1, sub, mids + [0.5 * (lo + hi)])

    return list(cells(0, np.ones(y.size, dtype=bool), []))
