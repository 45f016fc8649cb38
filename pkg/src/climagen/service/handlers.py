"""Endpoint handlers: pydantic request in, pydantic response out.

All pipeline logic accessible over HTTP or through the CLI lives here; the
FastAPI routes and the CLI are both thin shells around these functions.
Errors surface as ServiceError with a category the shells map to HTTP
statuses or exit codes.
"""

from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path

import numpy as np

from .. import __version__, arma, corrfit, distfit, genseq, neuralfit, solargeo, validate
from ..climdata import (
    ClimateSeries,
    Predicate,
    SelectionCriteria,
    SiteMeta,
    bin_data,
    describe,
    ingest_csv,
    select,
)
from ..errors import ClimagenError, DataError, UsageError
from . import schemas as sc


class ServiceError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category  # "usage" | "data"
        self.message = message


def _wrap(fn):
    def inner(req):
        try:
            return fn(req)
        except UsageError as exc:
            raise ServiceError("usage", str(exc)) from exc
        except ClimagenError as exc:
            raise ServiceError("data", str(exc)) from exc
        except OSError as exc:  # unreadable data, unwritable output paths
            raise ServiceError("data", str(exc)) from exc

    inner.__name__ = fn.__name__
    return inner


def _criteria(model: sc.CriteriaModel) -> SelectionCriteria:
    return SelectionCriteria(
        months=frozenset(model.months),
        hour_range=tuple(model.hour_range) if model.hour_range else None,
        predicates=tuple(Predicate(v, lo, hi) for v, lo, hi in model.predicates),
    )


def _site(model: sc.SiteModel | None) -> SiteMeta | None:
    if model is None:
        return None
    return SiteMeta(
        name=model.name,
        latitude=model.latitude,
        longitude=model.longitude,
        altitude=model.altitude,
        utc_offset=model.utc_offset,
    )


def _load(data_path: str, schema=None, sentinel: float = -999.0) -> dict[str, ClimateSeries]:
    _, series = ingest_csv(data_path, schema=schema, missing_sentinel=sentinel)
    return {s.variable: s for s in series}


def _load_req(req) -> dict[str, ClimateSeries]:
    return _load(req.data, getattr(req, "schema_map", None), getattr(req, "missing_sentinel", -999.0))


def _derive_missing(by_var: dict[str, ClimateSeries], names, site: SiteMeta | None) -> None:
    """Materialize clearness_index / sunshine_fraction columns on demand."""
    for name in names:
        if name in by_var:
            continue
        if name == "clearness_index" and "global_rad" in by_var and site is not None:
            by_var[name] = solargeo.clearness_index(by_var["global_rad"], site)
        elif name == "sunshine_fraction" and "insolation_hours" in by_var and site is not None:
            by_var[name] = solargeo.sunshine_fraction(by_var["insolation_hours"], site)


def _pick(by_var: dict[str, ClimateSeries], variable: str, data_path: str) -> ClimateSeries:
    if variable not in by_var:
        raise DataError(
            f"variable {variable!r} not found in {data_path} "
            f"(has: {sorted(by_var)})"
        )
    return by_var[variable]


def _span(series: ClimateSeries) -> tuple[str, str]:
    return (series.timestamps[0].isoformat(), series.timestamps[-1].isoformat())


@_wrap
def handle_describe(req: sc.DescribeRequest) -> sc.DescribeResponse:
    by_var = _load_req(req)
    series = _pick(by_var, req.variable, req.data)
    sel = select(series, _criteria(req.criteria), companions=list(by_var.values()))
    stats = describe(sel)
    hist_path = None
    if req.histogram_width:
        table = bin_data(sel, req.histogram_width)
        out = Path(req.histogram_out or f"{req.variable}_hist.csv")
        _write_bins(out, table)
        hist_path = str(out)
    return sc.DescribeResponse(
        variable=req.variable,
        cadence=series.cadence,
        summary=sc.SummaryModel(**stats.__dict__),
        histogram_path=hist_path,
    )


def _write_bins(path: Path, table) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["lower_edge,count,hours"]
    for edge, count, hours in table.bins:
        lines.append(f"{edge!r},{count},{hours!r}")
    path.write_text("\n".join(lines) + "\n")


@_wrap
def handle_bins(req: sc.BinsRequest) -> sc.BinsResponse:
    by_var = _load_req(req)
    series = _pick(by_var, req.variable, req.data)
    sel = select(series, _criteria(req.criteria), companions=list(by_var.values()))
    table = bin_data(sel, req.width)
    out_path = None
    if req.out:
        _write_bins(Path(req.out), table)
        out_path = req.out
    return sc.BinsResponse(
        variable=req.variable, width=req.width, bins=table.bins, out_path=out_path
    )


@_wrap
def handle_fit_dist(req: sc.FitDistRequest) -> sc.FitDistResponse:
    by_var = _load_req(req)
    criteria = _criteria(req.criteria)
    site = _site(req.site)

    if req.variable == "clearness_index" and "clearness_index" not in by_var:
        if "global_rad" not in by_var or site is None:
            raise DataError(
                "no clearness_index column; deriving it needs global_rad data and --site"
            )
        by_var["clearness_index"] = solargeo.clearness_index(by_var["global_rad"], site)

    # the clearness-index law describes one value per day; aggregate hourly
    # input to daily energy ratios before fitting
    if (
        req.law == "saunier"
        and req.variable == "clearness_index"
        and by_var["clearness_index"].cadence == "hourly"
    ):
        if "global_rad" in by_var and site is not None:
            by_var["clearness_index"] = solargeo.daily_clearness_index(
                by_var["global_rad"], site
            )
        else:
            hourly = by_var["clearness_index"]
            by_day: dict = {}
            for ts, v in zip(hourly.timestamps, hourly.values):
                if np.isfinite(v):
                    by_day.setdefault(ts.date(), []).append(float(v))
            days = sorted(by_day)
            vals = np.array([float(np.mean(by_day[d])) for d in days])
            stamps = [datetime(d.year, d.month, d.day) for d in days]
            by_var["clearness_index"] = ClimateSeries(
                "clearness_index", "daily", stamps, vals
            )

    series = _pick(by_var, req.variable, req.data)
    sel = select(series, criteria, companions=list(by_var.values()))
    vals = sel.non_missing()

    if req.law == "weibull":
        params = distfit.weibull_fit(sel)
        gof_sample = vals
    elif req.law == "gaussian":
        params = distfit.gaussian_fit(sel)
        gof_sample = vals
    elif req.law == "saunier":
        params = distfit.saunier_fit(sel, kt_max=req.kt_max)
        gof_sample = np.clip(vals / params.kt_max, 0.0, 1.0)
    else:
        raise UsageError(f"unknown law {req.law!r} (weibull, saunier, gaussian)")

    gof = None
    try:
        g = distfit.chi2_gof(gof_sample, params, n_bins=req.gof_bins, alpha=req.alpha)
        gof = sc.GofModel(statistic=g.statistic, dof=g.dof, p_value=g.p_value, passed=g.passed)
    except ClimagenError:
        pass  # too little data for a meaningful chi-square; fit still stored

    registry = genseq.ModelRegistry(req.registry)
    key = registry.put(
        req.variable, criteria, req.law, params,
        diagnostics={"gof": gof.model_dump() if gof else None, "n": int(vals.size)},
        data_span=_span(series),
    )
    return sc.FitDistResponse(
        key=key, law=req.law, params=params.to_dict(), gof=gof, n=int(vals.size)
    )


@_wrap
def handle_fit_corr(req: sc.FitCorrRequest) -> sc.FitCorrResponse:
    by_var = _load_req(req)
    criteria = _criteria(req.criteria)
    _derive_missing(by_var, [req.response, *req.predictors], _site(req.site))
    response = _pick(by_var, req.response, req.data)
    predictors = [_pick(by_var, p, req.data) for p in req.predictors]
    model = corrfit.fit_correlation(req.template, response, predictors, criteria)
    sig = corrfit.significance(model, alpha=req.alpha)

    surface_path = None
    if req.error_surface_out:
        x, _ = model.observations
        grid = {}
        for j, name in enumerate(model.predictors):
            col = x[:, j]
            grid[name] = np.linspace(col.min(), col.max() + 1e-9, req.error_surface_bins + 1)
        rows = corrfit.error_surface(model, grid)
        out = Path(req.error_surface_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        header = [*model.predictors, "mean_rel_error_pct", "n"]
        lines = [",".join(header)]
        for row in rows:
            cells = [repr(float(row[p])) for p in model.predictors]
            err = row["mean_rel_error_pct"]
            cells.append("" if err is None else repr(float(err)))
            cells.append(str(row["n"]))
            lines.append(",".join(cells))
        out.write_text("\n".join(lines) + "\n")
        surface_path = str(out)

    registry = genseq.ModelRegistry(req.registry)
    key = registry.put(
        req.response, criteria, "correlation", model,
        diagnostics={"r2": model.diagnostics.r2, "n": model.diagnostics.n},
        data_span=_span(response),
    )
    return sc.FitCorrResponse(
        key=key,
        template=req.template,
        coefficients=[float(c) for c in model.coefficients],
        r2=model.diagnostics.r2,
        f_statistic=model.diagnostics.f_statistic,
        f_pass=sig.f_pass,
        t_statistics=model.diagnostics.t_statistics,
        t_pass=sig.t_pass,
        residual_std=model.diagnostics.residual_std,
        n=model.diagnostics.n,
        error_surface_path=surface_path,
    )


@_wrap
def handle_fit_arma(req: sc.FitArmaRequest) -> sc.FitArmaResponse:
    by_var = _load_req(req)
    criteria = _criteria(req.criteria)
    series = _pick(by_var, req.variable, req.data)
    sel = select(series, criteria, companions=list(by_var.values()))

    # identify on the deseasonalized scale, the one estimation/simulation use
    acf = arma.deseasonalized_acf(sel, max_lag=req.max_lag)
    ident = arma.identify(acf)
    p = req.p if req.p is not None else ident.p
    q = req.q if req.q is not None else ident.q
    model = arma.estimate(sel, p, q)
    diag = arma.diagnose(model, sel, max_lag=req.max_lag)

    acf_path = None
    if req.acf_out:
        out = Path(req.acf_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        lines = ["lag,acf,bartlett_bound,pacf,quenouille_bound"]
        for k in range(req.max_lag + 1):
            lines.append(
                f"{k},{float(acf.r[k])!r},{float(acf.bartlett_bounds[k])!r},"
                f"{float(acf.alpha[k])!r},{float(acf.quenouille_bound)!r}"
            )
        out.write_text("\n".join(lines) + "\n")
        acf_path = str(out)

    registry = genseq.ModelRegistry(req.registry)
    key = registry.put(
        req.variable, criteria, "arma", model,
        diagnostics={
            "identified": [ident.kind, ident.p, ident.q],
            "residual_pass": diag.passed,
            "ljung_box_p": diag.ljung_box_p,
            "standardized": "per-slot deseasonal profile",
        },
        data_span=_span(series),
    )
    return sc.FitArmaResponse(
        key=key,
        identified_kind=ident.kind,
        identified_p=ident.p,
        identified_q=ident.q,
        white_noise=ident.white_noise,
        p=p,
        q=q,
        phi=[float(v) for v in model.phi],
        theta=[float(v) for v in model.theta],
        noise_sigma=model.noise_sigma,
        flags=model.flags,
        residual_check_pass=diag.passed,
        residual_exceedances=diag.n_exceed,
        ljung_box_p=diag.ljung_box_p,
        acf=[float(v) for v in acf.r],
        pacf=[float(v) for v in acf.alpha],
        bartlett_bounds=[float(v) for v in acf.bartlett_bounds],
        quenouille_bound=acf.quenouille_bound,
        acf_path=acf_path,
    )


_DEFAULT_NN_INPUTS = {
    "dry_bulb_temp": ["global_rad", "diffuse_rad", "wind_speed"],
    "rel_humidity": ["dry_bulb_temp"],
}


def _nn_matrices(req, by_var, criteria):
    inputs = req.inputs or _DEFAULT_NN_INPUTS.get(req.variable)
    if not inputs:
        raise UsageError(f"no default inputs for {req.variable!r}; pass --inputs")
    target = _pick(by_var, req.variable, req.data)
    cols = [_pick(by_var, v, req.data) for v in inputs]
    companions = list(by_var.values())
    sel_t = select(target, criteria, companions=companions)
    sel_x = [select(c, criteria, companions=companions) for c in cols]
    y = sel_t.values
    x = np.column_stack([s.values for s in sel_x])
    ok = np.isfinite(y) & np.all(np.isfinite(x), axis=1)
    if int(ok.sum()) < 10:
        raise DataError(f"only {int(ok.sum())} complete samples after filtering")
    return inputs, x[ok], y[ok], target


@_wrap
def handle_fit_nn(req: sc.FitNnRequest) -> sc.FitNnResponse:
    by_var = _load_req(req)
    criteria = _criteria(req.criteria)
    inputs, x, y, target = _nn_matrices(req, by_var, criteria)
    model = neuralfit.train_lm(
        x, y, n_hidden=req.n_hidden, seed=req.seed, max_iter=req.max_iter,
        input_names=inputs,
    )
    final_eqm = neuralfit.eqm(model, x, y)
    registry = genseq.ModelRegistry(req.registry)
    key = registry.put(
        req.variable, criteria, "neural", model,
        diagnostics={"eqm": final_eqm, "n": int(y.size), "n_hidden": req.n_hidden},
        data_span=_span(target),
    )
    return sc.FitNnResponse(
        key=key,
        inputs=inputs,
        n_hidden=req.n_hidden,
        eqm=final_eqm,
        iterations=model.report.iterations,
        stop_reason=model.report.stop_reason,
        n=int(y.size),
    )


@_wrap
def handle_sweep_nn(req: sc.SweepNnRequest) -> sc.SweepNnResponse:
    by_var = _load_req(req)
    criteria = _criteria(req.criteria)
    inputs, x, y, target = _nn_matrices(req, by_var, criteria)
    model, entries = neuralfit.sweep_hidden(
        x, y, hidden_range=range(req.hidden_min, req.hidden_max + 1),
        seed=req.seed, max_iter=req.max_iter, input_names=inputs,
    )
    registry = genseq.ModelRegistry(req.registry)
    key = registry.put(
        req.variable, criteria, "neural", model,
        diagnostics={
            "eqm": neuralfit.eqm(model, x, y),
            "n": int(y.size),
            "n_hidden": model.n_hidden,
            "sweep": [[e.n_hidden, e.train_eqm, e.val_eqm] for e in entries],
        },
        data_span=_span(target),
    )
    return sc.SweepNnResponse(
        key=key,
        best_hidden=model.n_hidden,
        entries=[sc.SweepEntryModel(**e.__dict__) for e in entries],
    )


def _plan_from_model(model: sc.PlanModel) -> genseq.GenerationPlan:
    return genseq.GenerationPlan(
        site=SiteMeta(
            name=model.site.name,
            latitude=model.site.latitude,
            longitude=model.site.longitude,
            altitude=model.site.altitude,
            utc_offset=model.site.utc_offset,
        ),
        variables=list(model.variables),
        start=datetime.fromisoformat(model.start),
        duration=model.duration,
        cadence=model.cadence,
        criteria=_criteria(model.criteria),
        seed=model.seed,
        overrides=dict(model.overrides),
        sky_temperature=model.sky_temperature,
        resample_gate=model.resample_gate,
    )


@_wrap
def handle_generate(req: sc.GenerateRequest) -> sc.GenerateResponse:
    plan = _plan_from_model(req.plan)
    registry = genseq.ModelRegistry(req.registry)
    seq = genseq.generate(plan, registry)
    paths = genseq.export(seq, "csv", req.out)
    plot_paths: list[str] = []
    if req.plotdata_out:
        plot_paths = [str(p) for p in genseq.export(seq, "plotdata", req.plotdata_out)]
    return sc.GenerateResponse(
        out_path=str(paths[0]),
        plotdata_paths=plot_paths,
        n_rows=len(seq.timestamps),
        columns=seq.column_names(),
        models=seq.provenance.get("models", {}),
        total_repairs=seq.provenance.get("coherence", {}).get("total_repairs", 0),
        seed=plan.seed,
    )


@_wrap
def handle_validate(req: sc.ValidateRequest) -> sc.ValidateResponse:
    gen_ts, gen_cols = genseq.load_table(req.generated)
    ref_ts, ref_cols = genseq.load_table(req.reference)
    site = _site(req.site)

    repairs = None
    if site is not None and gen_ts:
        gaps = [
            (gen_ts[i] - gen_ts[i - 1]).total_seconds() / 3600.0
            for i in range(1, len(gen_ts))
        ]
        cadence = "daily" if gaps and float(np.median(gaps)) >= 18.0 else "hourly"
        probe = genseq.GeneratedSequence(
            site=site,
            cadence=cadence,
            timestamps=list(gen_ts),
            columns={k: v.copy() for k, v in gen_cols.items()},
            provenance={},
        )
        _, audit = genseq.enforce_coherence(probe)
        repairs = int(audit["total_repairs"])

    report = validate.full_report(
        gen_ts, gen_cols, ref_ts, ref_cols,
        alpha=req.alpha, site=site, coherence_repairs=repairs,
    )
    report_path = None
    if req.report_out:
        out = Path(req.report_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        report_path = str(out)
    return sc.ValidateResponse(
        passed=report.passed,
        report=report.to_dict(),
        text=report.render_text(),
        report_path=report_path,
    )


@_wrap
def handle_export(req: sc.ExportRequest) -> sc.ExportResponse:
    ts, cols = genseq.load_table(req.sequence)
    gaps = [
        (ts[i] - ts[i - 1]).total_seconds() / 3600.0 for i in range(1, len(ts))
    ]
    cadence = "daily" if gaps and float(np.median(gaps)) >= 18.0 else "hourly"
    seq = genseq.GeneratedSequence(
        site=SiteMeta("export", 0.0, 0.0, 0.0, 0.0),
        cadence=cadence,
        timestamps=ts,
        columns=cols,
        provenance={"source": req.sequence},
    )
    paths = genseq.export(seq, req.format, req.out)
    return sc.ExportResponse(paths=[str(p) for p in paths])


@_wrap
def handle_registry_list(req: sc.RegistryListRequest) -> sc.RegistryListResponse:
    registry = genseq.ModelRegistry(req.registry)
    return sc.RegistryListResponse(
        entries=[
            sc.RegistryEntryModel(
                key=e.key,
                variable=e.variable,
                kind=e.kind,
                months=sorted(e.criteria.months),
                fit_date=e.fit_date,
            )
            for e in registry.entries()
        ]
    )


def handle_health(_req=None) -> sc.HealthResponse:
    return sc.HealthResponse(status="ok", version=__version__)


HANDLERS = {
    "describe": (sc.DescribeRequest, handle_describe),
    "bins": (sc.BinsRequest, handle_bins),
    "fit/dist": (sc.FitDistRequest, handle_fit_dist),
    "fit/corr": (sc.FitCorrRequest, handle_fit_corr),
    "fit/arma": (sc.FitArmaRequest, handle_fit_arma),
    "fit/nn": (sc.FitNnRequest, handle_fit_nn),
    "sweep/nn": (sc.SweepNnRequest, handle_sweep_nn),
    "generate": (sc.GenerateRequest, handle_generate),
    "validate": (sc.ValidateRequest, handle_validate),
    "export": (sc.ExportRequest, handle_export),
    "registry/list": (sc.RegistryListRequest, handle_registry_list),
}
