"""Command-line client for the pipeline: describe, bin, fit, generate,
validate, export.

Every subcommand builds the same request models the HTTP service accepts and
dispatches them either in-process (default) or to a running service given
--server / CLIMAGEN_SERVER. Exit codes: 0 ok, 1 usage error, 2 data or model
error, 3 validation failure.
"""

from __future__ import annotations

import json
import secrets
import sys
from pathlib import Path

import click
import httpx

from . import __version__
from .service import schemas as sc
from .service.handlers import HANDLERS, ServiceError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VALIDATION = 3

DEFAULT_REGISTRY = "registry"


class Client:
    """Thin dispatcher: local handler call or HTTP POST to a service."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, endpoint: str, request):
        req_cls, handler = HANDLERS[endpoint]
        assert isinstance(request, req_cls)
        if not self.server:
            return handler(request)
        resp = httpx.post(
            f"{self.server}/api/{endpoint}",
            json=request.model_dump(mode="json"),
            timeout=600.0,
        )
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"category": "data", "message": resp.text}
            raise ServiceError(body.get("category", "data"), body.get("message", ""))
        return resp.json()


def _as_dict(result) -> dict:
    return result if isinstance(result, dict) else result.model_dump()


def dispatch(ctx, endpoint: str, request) -> dict:
    """Call an endpoint and map errors to the documented exit codes."""
    try:
        return _as_dict(ctx.obj["client"].call(endpoint, request))
    except ServiceError as exc:
        click.echo(f"error ({exc.category}): {exc.message}", err=True)
        sys.exit(EXIT_USAGE if exc.category == "usage" else EXIT_DATA)
    except httpx.HTTPError as exc:
        click.echo(f"error (service): {exc}", err=True)
        sys.exit(EXIT_DATA)


@click.group()
@click.version_option(__version__)
@click.option("--server", envvar="CLIMAGEN_SERVER", default=None,
              help="Base URL of a running climagen service; default runs in-process.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config with defaults (registry, site, alpha, seed).")
@click.pass_context
def cli(ctx, server, config_path):
    """Weather-data characterization, modeling, and sequence generation."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = Client(server)
    ctx.obj["config"] = json.loads(Path(config_path).read_text()) if config_path else {}


def _cfg(ctx, key, flag_value, fallback=None):
    if flag_value is not None:
        return flag_value
    return ctx.obj["config"].get(key, fallback)


def _registry(ctx, flag_value) -> str:
    # precedence: --registry flag > CLIMAGEN_REGISTRY > config file > ./registry
    import os

    return (
        flag_value
        or os.environ.get("CLIMAGEN_REGISTRY")
        or ctx.obj["config"].get("registry")
        or DEFAULT_REGISTRY
    )


def _criteria_model(months, hours, predicates) -> sc.CriteriaModel:
    preds = []
    for spec in predicates or ():
        try:
            var, lo, hi = spec.split(":")
            preds.append((var, float(lo), float(hi)))
        except ValueError:
            raise click.UsageError(
                f"bad predicate {spec!r}; expected VAR:LO:HI, e.g. wind_speed:2:4"
            )
    return sc.CriteriaModel(
        months=sorted(months) if months else list(range(1, 13)),
        hour_range=tuple(hours) if hours else None,
        predicates=preds,
    )


def _site_model(ctx, site_path) -> sc.SiteModel | None:
    raw = None
    if site_path:
        raw = json.loads(Path(site_path).read_text())
    elif ctx.obj["config"].get("site"):
        raw = ctx.obj["config"]["site"]
    return sc.SiteModel(**raw) if raw else None


def _seed_or_print(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(32)
        click.echo(f"seed: {seed} (pass --seed {seed} to reproduce)")
    return seed


schema_opt = click.option("--schema", "schema_str", default=None,
                          help='JSON column mapping, e.g. {"date":"timestamp","T":"dry_bulb_temp"}.')
sentinel_opt = click.option("--sentinel", type=float, default=None,
                            help="Missing-value sentinel in the data (default -999).")


def _data_kwargs(ctx, schema_str, sentinel) -> dict:
    schema = json.loads(schema_str) if schema_str else ctx.obj["config"].get("schema")
    if sentinel is None:
        sentinel = ctx.obj["config"].get("missing_sentinel", -999.0)
    return {"schema_map": schema, "missing_sentinel": sentinel}


months_opt = click.option("--months", "-m", multiple=True, type=click.IntRange(1, 12),
                          help="Restrict to these calendar months (repeatable).")
hours_opt = click.option("--hours", nargs=2, type=int, default=None,
                         help="Inclusive hour-of-day band, e.g. --hours 8 18.")
pred_opt = click.option("--where", "predicates", multiple=True,
                        help="Value bin VAR:LO:HI on a companion variable (repeatable).")
registry_opt = click.option("--registry", default=None,
                            help="Model registry directory (or CLIMAGEN_REGISTRY).")


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@months_opt
@hours_opt
@pred_opt
@click.option("--hist-width", type=float, default=None, help="Also emit histogram plot data.")
@click.option("--hist-out", default=None)
@schema_opt
@sentinel_opt
@click.pass_context
def describe(ctx, data, variable, months, hours, predicates, hist_width, hist_out,
             schema_str, sentinel):
    """Summary statistics (and optional histogram plot data) for one variable."""
    req = sc.DescribeRequest(
        data=data, variable=variable,
        criteria=_criteria_model(months, hours, predicates),
        histogram_width=hist_width, histogram_out=hist_out,
        **_data_kwargs(ctx, schema_str, sentinel),
    )
    out = dispatch(ctx, "describe", req)
    s = out["summary"]
    click.echo(f"{out['variable']} ({out['cadence']}): count {s['count']}, "
               f"missing {s['missing_count']}")
    click.echo(f"  mean {s['mean']:.4g}  std {s['std']:.4g}  "
               f"min {s['min']:.4g}  max {s['max']:.4g}"
               + ("  [n<2: std degenerate]" if s["degenerate"] else ""))
    if out.get("histogram_path"):
        click.echo(f"  histogram plot data: {out['histogram_path']}")


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@click.option("--width", type=float, required=True)
@months_opt
@hours_opt
@pred_opt
@click.option("-o", "--out", default=None, help="Write the bin table as CSV.")
@schema_opt
@sentinel_opt
@click.pass_context
def bins(ctx, data, variable, width, months, hours, predicates, out, schema_str, sentinel):
    """Bin-data table (hours spent per value interval)."""
    req = sc.BinsRequest(
        data=data, variable=variable, width=width,
        criteria=_criteria_model(months, hours, predicates), out=out,
        **_data_kwargs(ctx, schema_str, sentinel),
    )
    res = dispatch(ctx, "bins", req)
    click.echo(f"{res['variable']}: {len(res['bins'])} bins of width {res['width']}")
    for edge, count, hours_ in res["bins"]:
        click.echo(f"  [{edge:g}, {edge + res['width']:g}): count {count}, hours {hours_:g}")
    if res.get("out_path"):
        click.echo(f"written: {res['out_path']}")


@cli.group()
def fit():
    """Fit a model and store it in the registry."""


@fit.command("dist")
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@click.option("--law", type=click.Choice(["weibull", "saunier", "gaussian"]), required=True)
@months_opt
@hours_opt
@pred_opt
@registry_opt
@click.option("--site", "site_path", type=click.Path(exists=True), default=None,
              help="Site JSON (needed to derive the clearness index).")
@click.option("--kt-max", type=float, default=None,
              help="User-provided maximum clearness index (default: 98th percentile).")
@click.option("--alpha", type=float, default=None)
@click.pass_context
def fit_dist(ctx, data, variable, law, months, hours, predicates, registry, site_path, kt_max, alpha):
    """Fit a distribution law (chi-square checked) and register it."""
    req = sc.FitDistRequest(
        data=data, variable=variable, law=law,
        registry=_registry(ctx, registry),
        criteria=_criteria_model(months, hours, predicates),
        site=_site_model(ctx, site_path), kt_max=kt_max,
        alpha=_cfg(ctx, "alpha", alpha, 0.05),
        **_data_kwargs(ctx, None, None),
    )
    out = dispatch(ctx, "fit/dist", req)
    click.echo(f"stored {out['key']}")
    click.echo(f"  params: {json.dumps(out['params'], sort_keys=True)}")
    if out.get("gof"):
        g = out["gof"]
        click.echo(f"  chi2: stat {g['statistic']:.3f} dof {g['dof']} "
                   f"p {g['p_value']:.4f} [{'pass' if g['passed'] else 'FAIL'}]")


@fit.command("corr")
@click.argument("data", type=click.Path())
@click.option("--response", required=True)
@click.option("--predictors", required=True, help="Comma-separated predictor variables.")
@click.option("--template", default="multilinear",
              help="Template id (poly1/poly2/poly3/multilinear/angstrom_linear).")
@months_opt
@hours_opt
@pred_opt
@registry_opt
@click.option("--alpha", type=float, default=None)
@click.option("--site", "site_path", type=click.Path(exists=True), default=None,
              help="Site JSON; enables derived clearness_index / sunshine_fraction predictors.")
@click.option("--error-surface", "error_surface_out", default=None,
              help="Write per-cell relative-error plot data to this CSV.")
@click.option("--surface-bins", type=int, default=10)
@click.pass_context
def fit_corr(ctx, data, response, predictors, template, months, hours, predicates,
             registry, alpha, site_path, error_surface_out, surface_bins):
    """Fit a correlation function on criteria-filtered data."""
    req = sc.FitCorrRequest(
        data=data, response=response,
        predictors=[p.strip() for p in predictors.split(",") if p.strip()],
        template=template, registry=_registry(ctx, registry),
        criteria=_criteria_model(months, hours, predicates),
        alpha=_cfg(ctx, "alpha", alpha, 0.05),
        site=_site_model(ctx, site_path),
        error_surface_out=error_surface_out,
        error_surface_bins=surface_bins,
        **_data_kwargs(ctx, None, None),
    )
    out = dispatch(ctx, "fit/corr", req)
    click.echo(f"stored {out['key']}")
    click.echo(f"  coefficients: {[round(c, 6) for c in out['coefficients']]}")
    click.echo(f"  r2 {out['r2']:.5f}  F {out['f_statistic']:.4g} "
               f"[{'pass' if out['f_pass'] else 'FAIL'}]  residual std {out['residual_std']:.4g}")
    click.echo(f"  t-tests: {['pass' if t else 'FAIL' for t in out['t_pass']]}")
    if out.get("error_surface_path"):
        click.echo(f"  error-surface plot data: {out['error_surface_path']}")


@fit.command("arma")
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@months_opt
@hours_opt
@pred_opt
@registry_opt
@click.option("--p", "p_order", type=int, default=None, help="AR order (default: identified).")
@click.option("--q", "q_order", type=int, default=None, help="MA order (default: identified).")
@click.option("--max-lag", type=int, default=20)
@click.option("--acf-out", default=None, help="Write ACF/PACF plot data to this CSV.")
@click.pass_context
def fit_arma(ctx, data, variable, months, hours, predicates, registry, p_order, q_order,
             max_lag, acf_out):
    """Identify and estimate a stochastic model, with residual diagnostics."""
    req = sc.FitArmaRequest(
        data=data, variable=variable, registry=_registry(ctx, registry),
        criteria=_criteria_model(months, hours, predicates),
        p=p_order, q=q_order, max_lag=max_lag, acf_out=acf_out,
        **_data_kwargs(ctx, None, None),
    )
    out = dispatch(ctx, "fit/arma", req)
    click.echo(f"stored {out['key']}")
    tag = " (white noise)" if out["white_noise"] else ""
    click.echo(f"  identified: {out['identified_kind']}"
               f"({out['identified_p']},{out['identified_q']}){tag}; "
               f"fitted orders ({out['p']},{out['q']})")
    click.echo(f"  phi {out['phi']}  theta {out['theta']}  sigma {out['noise_sigma']:.5f}")
    if out["flags"]:
        click.echo(f"  flags: {out['flags']}")
    click.echo(f"  residual whiteness: {out['residual_exceedances']} exceedance(s) "
               f"[{'pass' if out['residual_check_pass'] else 'FAIL'}], "
               f"Ljung-Box p {out['ljung_box_p']:.4f}")
    if out.get("acf_path"):
        click.echo(f"  ACF/PACF plot data: {out['acf_path']}")


@fit.command("nn")
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@click.option("--inputs", default=None, help="Comma-separated input variables.")
@months_opt
@hours_opt
@pred_opt
@registry_opt
@click.option("--hidden", type=int, default=3)
@click.option("--seed", type=int, default=None)
@click.option("--max-iter", type=int, default=200)
@click.pass_context
def fit_nn(ctx, data, variable, inputs, months, hours, predicates, registry, hidden, seed, max_iter):
    """Train a small network regression and register it."""
    req = sc.FitNnRequest(
        data=data, variable=variable,
        inputs=[s.strip() for s in inputs.split(",")] if inputs else None,
        registry=_registry(ctx, registry),
        criteria=_criteria_model(months, hours, predicates),
        n_hidden=hidden, seed=_seed_or_print(seed), max_iter=max_iter,
        **_data_kwargs(ctx, None, None),
    )
    out = dispatch(ctx, "fit/nn", req)
    click.echo(f"stored {out['key']}")
    click.echo(f"  inputs {out['inputs']}  hidden {out['n_hidden']}  "
               f"eqm {out['eqm']:.6g} after {out['iterations']} iterations "
               f"({out['stop_reason']}), n={out['n']}")


@cli.group()
def sweep():
    """Hyperparameter sweeps."""


@sweep.command("nn")
@click.argument("data", type=click.Path())
@click.option("--var", "variable", required=True)
@click.option("--inputs", default=None)
@months_opt
@hours_opt
@pred_opt
@registry_opt
@click.option("--hidden", nargs=2, type=int, default=(1, 8), help="Hidden-size range, e.g. --hidden 1 8.")
@click.option("--seed", type=int, default=None)
@click.option("--max-iter", type=int, default=200)
@click.pass_context
def sweep_nn(ctx, data, variable, inputs, months, hours, predicates, registry, hidden, seed, max_iter):
    """Select the hidden-layer size by validation error (80/20 split)."""
    req = sc.SweepNnRequest(
        data=data, variable=variable,
        inputs=[s.strip() for s in inputs.split(",")] if inputs else None,
        registry=_registry(ctx, registry),
        criteria=_criteria_model(months, hours, predicates),
        hidden_min=hidden[0], hidden_max=hidden[1],
        seed=_seed_or_print(seed), max_iter=max_iter,
        **_data_kwargs(ctx, None, None),
    )
    out = dispatch(ctx, "sweep/nn", req)
    click.echo("hidden  train_eqm      val_eqm")
    for e in out["entries"]:
        click.echo(f"{e['n_hidden']:>6}  {e['train_eqm']:<12.6g}  {e['val_eqm']:<12.6g}")
    click.echo(f"best: {out['best_hidden']} hidden units; stored {out['key']}")


@cli.command()
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True,
              help="Generation plan JSON.")
@registry_opt
@click.option("-o", "--out", default="generated.csv")
@click.option("--plotdata", "plotdata_out", default=None)
@click.option("--seed", type=int, default=None, help="Override the plan seed.")
@click.pass_context
def generate(ctx, plan_path, registry, out, plotdata_out, seed):
    """Generate an artificial sequence from a plan against the registry."""
    raw = json.loads(Path(plan_path).read_text())
    if seed is not None:
        raw["seed"] = seed
    if "seed" not in raw:
        raw["seed"] = _seed_or_print(None)
    plan = sc.PlanModel(**raw)
    req = sc.GenerateRequest(
        plan=plan, registry=_registry(ctx, registry), out=out, plotdata_out=plotdata_out,
    )
    res = dispatch(ctx, "generate", req)
    click.echo(f"wrote {res['out_path']} ({res['n_rows']} rows, seed {res['seed']})")
    click.echo(f"  columns: {res['columns']}")
    click.echo(f"  models: {json.dumps(res['models'], sort_keys=True)}")
    click.echo(f"  coherence repairs: {res['total_repairs']}")
    if res.get("plotdata_paths"):
        click.echo(f"  plot data: {len(res['plotdata_paths'])} file(s)")


@cli.command()
@click.option("--generated", required=True, type=click.Path())
@click.option("--reference", required=True, type=click.Path())
@click.option("--alpha", type=float, default=None)
@click.option("--site", "site_path", type=click.Path(exists=True), default=None)
@click.option("--report", "report_out", default=None, help="Write the JSON report here.")
@click.pass_context
def validate(ctx, generated, reference, alpha, site_path, report_out):
    """Run the statistical validation battery; exit code 3 on failure."""
    req = sc.ValidateRequest(
        generated=generated, reference=reference,
        alpha=_cfg(ctx, "alpha", alpha, 0.05),
        site=_site_model(ctx, site_path), report_out=report_out,
    )
    out = dispatch(ctx, "validate", req)
    click.echo(out["text"])
    if out.get("report_path"):
        click.echo(f"report: {out['report_path']}")
    if not out["passed"]:
        sys.exit(EXIT_VALIDATION)


@cli.command()
@click.option("--sequence", required=True, type=click.Path(), help="Sequence CSV to convert.")
@click.option("--format", "fmt", type=click.Choice(["csv", "plotdata"]), default="plotdata")
@click.option("-o", "--out", required=True)
@click.pass_context
def export(ctx, sequence, fmt, out):
    """Re-export a sequence CSV (e.g. to per-variable plot-data files)."""
    req = sc.ExportRequest(sequence=sequence, format=fmt, out=out)
    res = dispatch(ctx, "export", req)
    for p in res["paths"]:
        click.echo(p)


@cli.command()
@registry_opt
@click.pass_context
def registry(ctx, registry):
    """List the model library."""
    req = sc.RegistryListRequest(registry=_registry(ctx, registry))
    res = dispatch(ctx, "registry/list", req)
    if not res["entries"]:
        click.echo("registry is empty")
        return
    for e in res["entries"]:
        click.echo(f"{e['key']}  (months {e['months']}, fitted {e['fit_date']})")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("climagen.service.app:app", host=host, port=port)


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
