"""Artificial sequence generation: the model library, plan resolution, staged
multi-variable synthesis, physical-coherence repair, derived variables, and
export.

Synthesis runs in a fixed stage order — stochastic drivers first (wind and
clearness index), then the radiation family through correlations, then the
thermodynamic variables through the black-box networks, and finally coherence
repair plus derived psychrometrics. Wind leads because it is an exogenous
predictor of the temperature network; the daily clearness index is spread
over daylight hours with the extraterrestrial profile so the daily energy is
preserved and nights stay dark.

A generation run is a pure function of (plan, registry snapshot): identical
inputs produce byte-identical exports.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from . import __version__, arma as arma_mod, corrfit, distfit, solargeo
from .climdata import (
    CADENCE_HOURS,
    DAILY,
    HOURLY,
    VARIABLES,
    ClimateSeries,
    SelectionCriteria,
    SiteMeta,
    wet_bulb,
)
from .errors import GenerationError, RegistryError, UsageError

MODEL_KINDS = ("weibull", "saunier", "gaussian", "liu_jordan", "arma", "correlation", "neural")

#: canonical export column order (extras appended alphabetically)
COLUMN_ORDER = list(VARIABLES)

#: repairs/checks ratio beyond which the model set is rejected as inconsistent
VIOLATION_BREAKER = 0.20


# ---------------------------------------------------------------------------
# model registry

def serialize_model(kind: str, model) -> dict:
    if kind in ("weibull", "saunier", "gaussian"):
        return model.to_dict()
    if kind in ("arma", "correlation", "neural"):
        return model.to_dict()
    if kind == "liu_jordan":
        raise RegistryError("liu_jordan is a reserved kind with no implementation")
    raise UsageError(f"unknown model kind {kind!r}")


def deserialize_model(kind: str, payload: dict):
    if kind == "weibull":
        return distfit.WeibullParams.from_dict(payload)
    if kind == "saunier":
        return distfit.SaunierParams.from_dict(payload)
    if kind == "gaussian":
        return distfit.GaussianParams.from_dict(payload)
    if kind == "arma":
        return arma_mod.ArmaModel.from_dict(payload)
    if kind == "correlation":
        return corrfit.CorrelationModel.from_dict(payload)
    if kind == "neural":
        return neural_from_dict(payload)
    if kind == "liu_jordan":
        raise RegistryError("liu_jordan is a reserved kind with no implementation")
    raise UsageError(f"unknown model kind {kind!r}")


def neural_from_dict(payload: dict):
    from .neuralfit import NeuralModel

    return NeuralModel.from_dict(payload)


def criteria_digest(criteria: SelectionCriteria) -> str:
    blob = json.dumps(criteria.to_dict(), sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:10]


def _period_tag(criteria: SelectionCriteria) -> str:
    months = sorted(criteria.months)
    if len(months) == 12:
        return "mall"
    return "m" + "-".join(f"{m:02d}" for m in months)


@dataclass
class RegistryEntry:
    key: str
    variable: str
    kind: str
    criteria: SelectionCriteria
    model: object
    provenance: dict

    @property
    def fit_date(self) -> str:
        return self.provenance.get("fit_date", "")


class ModelRegistry:
    """On-disk library of fitted models, one JSON document per entry, keyed by
    (variable, period, criteria digest, kind)."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def make_key(self, variable: str, criteria: SelectionCriteria, kind: str) -> str:
        return f"{variable}__{_period_tag(criteria)}__{criteria_digest(criteria)}__{kind}"

    def put(
        self,
        variable: str,
        criteria: SelectionCriteria,
        kind: str,
        model,
        diagnostics: dict | None = None,
        data_span: tuple[str, str] | None = None,
        fit_date: str | None = None,
    ) -> str:
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {kind!r}")
        key = self.make_key(variable, criteria, kind)
        doc = {
            "schema": 1,
            "key": key,
            "variable": variable,
            "kind": kind,
            "criteria": criteria.to_dict(),
            "model": serialize_model(kind, model),
            "provenance": {
                "fit_date": fit_date or datetime.now().isoformat(timespec="seconds"),
                "data_span": list(data_span) if data_span else None,
                "diagnostics": diagnostics or {},
                "version": __version__,
            },
        }
        path = self.root / f"{key}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True))
        return key

    def get(self, key: str) -> RegistryEntry:
        path = self.root / f"{key}.json"
        if not path.exists():
            raise RegistryError(f"no registry entry {key!r} under {self.root}")
        doc = json.loads(path.read_text())
        return RegistryEntry(
            key=doc["key"],
            variable=doc["variable"],
            kind=doc["kind"],
            criteria=SelectionCriteria.from_dict(doc["criteria"]),
            model=deserialize_model(doc["kind"], doc["model"]),
            provenance=doc.get("provenance", {}),
        )

    def entries(self) -> list[RegistryEntry]:
        return [self.get(p.stem) for p in sorted(self.root.glob("*.json"))]

    def candidates(self, variable: str, kind: str) -> list[RegistryEntry]:
        return [e for e in self.entries() if e.variable == variable and e.kind == kind]


# ---------------------------------------------------------------------------
# plans

@dataclass
class GenerationPlan:
    site: SiteMeta
    variables: list[str]
    start: datetime
    duration: int  # steps at the plan cadence
    cadence: str = HOURLY
    criteria: SelectionCriteria = field(default_factory=SelectionCriteria)
    seed: int = 0
    overrides: dict[str, str] = field(default_factory=dict)
    sky_temperature: bool = False
    resample_gate: dict | None = None

    def __post_init__(self):
        if self.duration < 1:
            raise UsageError("duration must be >= 1")
        if self.cadence not in CADENCE_HOURS:
            raise UsageError(f"unknown cadence {self.cadence!r}")
        for v in self.variables:
            if v not in VARIABLES:
                raise UsageError(f"unknown variable {v!r} in plan")

    def timestamps(self) -> list[datetime]:
        step = timedelta(hours=CADENCE_HOURS[self.cadence])
        return [self.start + i * step for i in range(self.duration)]

    def to_dict(self) -> dict:
        return {
            "site": self.site.to_dict(),
            "variables": list(self.variables),
            "start": self.start.isoformat(),
            "duration": self.duration,
            "cadence": self.cadence,
            "criteria": self.criteria.to_dict(),
            "seed": self.seed,
            "overrides": dict(self.overrides),
            "sky_temperature": self.sky_temperature,
            "resample_gate": self.resample_gate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationPlan":
        return cls(
            site=SiteMeta.from_dict(d["site"]),
            variables=list(d["variables"]),
            start=datetime.fromisoformat(d["start"]),
            duration=int(d["duration"]),
            cadence=d.get("cadence", HOURLY),
            criteria=SelectionCriteria.from_dict(d.get("criteria") or {"months": list(range(1, 13))}),
            seed=int(d.get("seed", 0)),
            overrides=dict(d.get("overrides") or {}),
            sky_temperature=bool(d.get("sky_temperature", False)),
            resample_gate=d.get("resample_gate"),
        )


@dataclass
class GeneratedSequence:
    site: SiteMeta
    cadence: str
    timestamps: list[datetime]
    columns: dict[str, np.ndarray]
    provenance: dict

    def column_names(self) -> list[str]:
        known = [c for c in COLUMN_ORDER if c in self.columns]
        extra = sorted(c for c in self.columns if c not in COLUMN_ORDER)
        return known + extra


# ---------------------------------------------------------------------------
# resolution

#: which registry kinds can drive each variable, in preference order
_KIND_PREFERENCE: dict[str, tuple[str, ...]] = {
    "clearness_index": ("arma", "saunier"),
    "dry_bulb_temp": ("neural",),
    "rel_humidity": ("neural",),
    "insolation_hours": ("correlation",),
    "diffuse_rad": ("correlation",),
    "beam_rad": ("correlation",),
    "nebulosity": ("correlation",),
}
_DEFAULT_KINDS = ("arma",)  # wind_speed, wind_direction, pressure, ...

_FIT_HINT = {
    "arma": "climagen fit arma --var {var} --months {months}",
    "saunier": "climagen fit dist --law saunier --var clearness_index --months {months}",
    "neural": "climagen fit nn --var {var} --months {months}",
    "correlation": "climagen fit corr --response {var} --months {months}",
}


def _model_dependencies(entry: RegistryEntry) -> list[str]:
    if entry.kind == "neural":
        return list(entry.model.inputs)
    if entry.kind == "correlation":
        return list(entry.model.predictors)
    return []


def resolve(plan: GenerationPlan, registry: ModelRegistry) -> dict[str, RegistryEntry | str]:
    """Assign a registry entry (or the marker "derived") to every variable the
    plan needs, following dependencies of neural/correlation models.

    Candidate entries must cover the plan months; among several, an exact
    criteria match wins, then the most recent fit date. Unresolvable
    variables raise one error naming them all, each with the fit command
    that would create the missing model.
    """
    assignment: dict[str, RegistryEntry | str] = {}
    missing: list[tuple[str, str]] = []
    queue = list(dict.fromkeys(plan.variables))
    seen = set()

    def pick(variable: str, kinds: tuple[str, ...]) -> RegistryEntry | None:
        if variable in plan.overrides:
            return registry.get(plan.overrides[variable])
        for kind in kinds:
            cands = [
                e
                for e in registry.candidates(variable, kind)
                if plan.criteria.months <= e.criteria.months
            ]
            if not cands:
                continue
            exact = [e for e in cands if e.criteria == plan.criteria]
            pool = exact or cands
            pool.sort(key=lambda e: (e.fit_date, e.key))
            return pool[-1]
        return None

    while queue:
        var = queue.pop(0)
        if var in seen:
            continue
        seen.add(var)
        if var == "wet_bulb_temp":
            assignment[var] = "derived"
            queue += ["dry_bulb_temp", "rel_humidity"]
            continue
        if var == "global_rad":
            assignment[var] = "derived"
            queue.append("clearness_index")
            continue
        kinds = _KIND_PREFERENCE.get(var, _DEFAULT_KINDS)
        entry = pick(var, kinds)
        if entry is None:
            if var == "beam_rad":
                assignment[var] = "derived"  # beam = global - diffuse via coherence
                queue += ["global_rad", "diffuse_rad"]
                continue
            months = ",".join(str(m) for m in sorted(plan.criteria.months))
            hint = _FIT_HINT.get(kinds[0], "climagen fit ...").format(var=var, months=months)
            missing.append((var, hint))
            continue
        assignment[var] = entry
        queue += _model_dependencies(entry)

    if missing:
        lines = "; ".join(f"{v} (try: {h})" for v, h in missing)
        raise GenerationError(f"no model resolvable for: {lines}")
    return assignment


def _topo_order(variables: list[str], deps: dict[str, list[str]], scope: set[str]) -> list[str]:
    """Order `variables` so each one's in-scope dependencies come first."""
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(v: str):
        if state.get(v) == 2:
            return
        if state.get(v) == 1:
            raise GenerationError(f"circular model dependency through {v!r}")
        state[v] = 1
        for d in deps.get(v, []):
            if d in scope:
                visit(d)
        state[v] = 2
        if v in variables:
            order.append(v)

    for v in variables:
        visit(v)
    return order


# ---------------------------------------------------------------------------
# generation

def _day_keys(timestamps: list[datetime]) -> tuple[list[date], np.ndarray]:
    days: list[date] = []
    idx = np.empty(len(timestamps), dtype=int)
    last: date | None = None
    for i, ts in enumerate(timestamps):
        d = ts.date()
        if d != last:
            days.append(d)
            last = d
        idx[i] = len(days) - 1
    return days, idx


def generate(plan: GenerationPlan, registry: ModelRegistry) -> GeneratedSequence:
    """Run the staged synthesis for a plan against a registry snapshot."""
    timestamps = plan.timestamps()
    bad_months = {ts.month for ts in timestamps} - plan.criteria.months
    if bad_months:
        raise UsageError(
            f"plan period spills into months {sorted(bad_months)} outside its criteria"
        )
    assignment = resolve(plan, registry)

    if plan.resample_gate:
        return _generate_gated(plan, registry, assignment)
    return _generate_once(plan, assignment, plan.seed)


def _generate_gated(plan: GenerationPlan, registry: ModelRegistry, assignment) -> GeneratedSequence:
    from . import validate as validate_mod

    gate = plan.resample_gate or {}
    ref_path = gate.get("reference")
    if not ref_path:
        raise UsageError("resample_gate needs a 'reference' CSV path")
    alpha = float(gate.get("alpha", 0.05))
    attempts = int(gate.get("max_attempts", 20))
    _, ref_cols = load_table(ref_path)
    last = None
    for attempt in range(attempts):
        seq = _generate_once(plan, assignment, [plan.seed, attempt])
        ok = True
        for var, col in seq.columns.items():
            ref = ref_cols.get(var)
            if ref is None:
                continue
            x = col[np.isfinite(col)]
            y = ref[np.isfinite(ref)]
            if x.size < 5 or y.size < 5:
                continue
            d, crit, passed = validate_mod.ks_two_sample(x, y, alpha=alpha)
            ok = ok and passed
        seq.provenance["resample_attempts"] = attempt + 1
        if ok:
            return seq
        last = seq
    assert last is not None
    last.provenance["resample_gate_failed"] = True
    return last


def _stream(seed, label: str) -> np.random.Generator:
    """Independent deterministic RNG stream per (plan seed, variable)."""
    entropy = seed if isinstance(seed, list) else [seed]
    digest = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy + [digest]))


def _generate_once(plan: GenerationPlan, assignment, seed) -> GeneratedSequence:
    timestamps = plan.timestamps()
    n = len(timestamps)
    site = plan.site
    cols: dict[str, np.ndarray] = {}
    aux: dict[str, np.ndarray] = {}
    model_keys: dict[str, str] = {}

    entries = {v: e for v, e in assignment.items() if isinstance(e, RegistryEntry)}
    derived = {v for v, e in assignment.items() if e == "derived"}
    for v, e in entries.items():
        model_keys[v] = e.key

    # stage 1: stochastic drivers
    stage1 = sorted(v for v, e in entries.items() if e.kind in ("arma", "saunier", "gaussian", "weibull"))
    days, day_idx = _day_keys(timestamps)
    for var in stage1:
        entry = entries[var]
        if entry.kind == "arma":
            rng_seed = _stream(seed, f"arma:{var}")
            sim = arma_mod.simulate(entry.model, n, rng_seed, start=timestamps[0])
            cols[var] = sim.values
        elif entry.kind == "saunier":
            params = entry.model
            rng = _stream(seed, f"saunier:{var}")
            x = distfit._saunier_sample(params, len(days), rng)
            kt_day = np.clip(x * params.kt_max, 0.0, 1.0)
            aux["kt_daily"] = kt_day[day_idx]
            if plan.cadence == DAILY:
                cols["clearness_index"] = kt_day[day_idx].copy()
            else:
                i0 = solargeo.extraterrestrial_series(site, timestamps, HOURLY)
                kt = kt_day[day_idx].copy()
                kt[i0 <= solargeo.NIGHT_I0_THRESHOLD] = np.nan
                cols["clearness_index"] = kt
        else:
            # iid sampling from a plain distribution law
            rng = _stream(seed, f"{entry.kind}:{var}")
            vals = distfit.sample_dist(entry.model, n, rng)
            _, lo, hi = VARIABLES[var]
            if lo is not None or hi is not None:
                vals = np.clip(vals, lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
            cols[var] = vals

    if "clearness_index" in entries and entries["clearness_index"].kind == "arma":
        kt_col = cols["clearness_index"]
        if plan.cadence == HOURLY:
            i0 = solargeo.extraterrestrial_series(site, timestamps, HOURLY)
            kt_col = kt_col.copy()
            kt_col[i0 <= solargeo.NIGHT_I0_THRESHOLD] = np.nan
            cols["clearness_index"] = kt_col
        day_mean = np.array(
            [np.nanmean(np.where(day_idx == i, kt_col, np.nan)) for i in range(len(days))]
        )
        day_mean = np.nan_to_num(day_mean, nan=0.0)
        aux["kt_daily"] = day_mean[day_idx]

    # stage 2: radiation family
    if "global_rad" in assignment:
        i0 = solargeo.extraterrestrial_series(site, timestamps, plan.cadence)
        if plan.cadence == HOURLY:
            kt = cols.get("clearness_index")
            if kt is None:
                raise GenerationError("global_rad needs a clearness-index driver")
            g = np.where(np.isfinite(kt), kt, 0.0) * i0
        else:
            g = aux.get("kt_daily", cols.get("clearness_index", np.zeros(n))) * i0
        cols["global_rad"] = g

    corr_vars = [v for v, e in entries.items() if e.kind == "correlation"]
    deps = {v: _model_dependencies(entries[v]) for v in corr_vars}
    scope = set(corr_vars)
    for var in _topo_order(sorted(corr_vars), deps, scope):
        entry = entries[var]
        x = np.column_stack([_predictor_column(p, cols, aux, n) for p in entry.model.predictors])
        if var == "insolation_hours" and plan.cadence == HOURLY:
            # daily-natured response: evaluate on daily means, broadcast
            daily_x = np.vstack([
                x[day_idx == i].mean(axis=0) for i in range(len(days))
            ])
            daily_val = np.atleast_1d(corrfit.evaluate(entry.model, daily_x))
            vals = np.asarray(daily_val)[day_idx]
        else:
            vals = np.atleast_1d(corrfit.evaluate(entry.model, x))
        _, lo, hi = VARIABLES[var]
        vals = np.clip(vals, lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
        cols[var] = vals

    # stage 3: thermodynamic variables through the black-box models
    neural_vars = [v for v, e in entries.items() if e.kind == "neural"]
    deps = {v: list(entries[v].model.inputs) for v in neural_vars}
    for var in _topo_order(sorted(neural_vars), deps, set(neural_vars)):
        from .neuralfit import forward

        entry = entries[var]
        x = np.column_stack([_predictor_column(p, cols, aux, n) for p in entry.model.inputs])
        vals = np.atleast_1d(forward(entry.model, x))
        _, lo, hi = VARIABLES[var]
        vals = np.clip(vals, lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
        cols[var] = vals

    seq = GeneratedSequence(
        site=site,
        cadence=plan.cadence,
        timestamps=timestamps,
        columns=cols,
        provenance={
            "plan": plan.to_dict(),
            "models": dict(sorted(model_keys.items())),
            "version": __version__,
        },
    )

    # stage 4: coherence repair with the inconsistency circuit breaker
    seq, report = enforce_coherence(seq)
    rate = report["violation_rate"]
    if rate > VIOLATION_BREAKER:
        raise GenerationError(
            f"models inconsistent with criteria: {rate:.0%} of coherence checks "
            f"needed repair (breaker at {VIOLATION_BREAKER:.0%})"
        )
    seq.provenance["coherence"] = report

    # stage 5: derived variables (intermediate driver columns stay in the
    # table; they are part of the provenance story)
    if "dry_bulb_temp" in cols and "rel_humidity" in cols:
        seq = derive_variables(seq, sky_temperature=plan.sky_temperature)
    return seq


def _predictor_column(name: str, cols: dict, aux: dict, n: int) -> np.ndarray:
    # night-missing clearness index is substituted by its daily value so
    # correlation/network inputs stay finite around the clock
    if name == "clearness_index":
        col = cols.get("clearness_index")
        if col is not None and np.all(np.isfinite(col)):
            return col
        if "kt_daily" in aux:
            return aux["kt_daily"]
    if name not in cols:
        raise GenerationError(f"predictor {name!r} not generated before use")
    col = cols[name]
    if not np.all(np.isfinite(col)):
        raise GenerationError(f"predictor {name!r} has missing values at generation time")
    return col


# ---------------------------------------------------------------------------
# coherence

def enforce_coherence(seq: GeneratedSequence) -> tuple[GeneratedSequence, dict]:
    """Clamp-and-repair pass in fixed rule order; every repaired cell is
    counted. Re-running on the result yields zero repairs (idempotent)."""
    cols = seq.columns
    n = len(seq.timestamps)
    repairs: dict[str, int] = {}
    checks = 0

    def fix(rule: str, mask: np.ndarray):
        nonlocal checks
        checks += int(mask.size)
        cnt = int(np.count_nonzero(mask))
        if cnt:
            repairs[rule] = repairs.get(rule, 0) + cnt

    if "wind_speed" in cols:
        v = cols["wind_speed"]
        bad = np.isfinite(v) & (v < 0.0)
        fix("wind_speed_nonneg", bad)
        cols["wind_speed"] = np.where(bad, 0.0, v)

    if "clearness_index" in cols:
        v = cols["clearness_index"]
        bad = np.isfinite(v) & ((v < 0.0) | (v > 1.0))
        fix("clearness_index_range", bad)
        cols["clearness_index"] = np.clip(v, 0.0, 1.0)

    for var in ("global_rad", "diffuse_rad", "beam_rad"):
        if var in cols:
            v = cols[var]
            bad = np.isfinite(v) & (v < 0.0)
            fix(f"{var}_nonneg", bad)
            cols[var] = np.where(bad, 0.0, v)

    if "global_rad" in cols and seq.cadence == HOURLY:
        i0 = solargeo.extraterrestrial_series(seq.site, seq.timestamps, HOURLY)
        night = i0 <= solargeo.NIGHT_I0_THRESHOLD
        g = cols["global_rad"]
        bad = night & np.isfinite(g) & (g != 0.0)
        fix("night_global_zero", bad)
        cols["global_rad"] = np.where(bad, 0.0, g)

    if "diffuse_rad" in cols and "global_rad" in cols:
        d, g = cols["diffuse_rad"], cols["global_rad"]
        bad = np.isfinite(d) & np.isfinite(g) & (d > g)
        fix("diffuse_le_global", bad)
        cols["diffuse_rad"] = np.where(bad, g, d)

    if "beam_rad" in cols and "diffuse_rad" in cols and "global_rad" in cols:
        b = cols["beam_rad"]
        target = cols["global_rad"] - cols["diffuse_rad"]
        bad = np.isfinite(b) & np.isfinite(target) & (np.abs(b - target) > 1e-9)
        fix("beam_is_global_minus_diffuse", bad)
        cols["beam_rad"] = np.where(np.isfinite(target), target, b)

    if "rel_humidity" in cols:
        v = cols["rel_humidity"]
        bad = np.isfinite(v) & ((v < 0.0) | (v > 100.0))
        fix("rel_humidity_range", bad)
        cols["rel_humidity"] = np.clip(v, 0.0, 100.0)

    if "insolation_hours" in cols:
        v = cols["insolation_hours"]
        bad = np.isfinite(v) & ((v < 0.0) | (v > 24.0))
        fix("insolation_range", bad)
        cols["insolation_hours"] = np.clip(v, 0.0, 24.0)

    if "nebulosity" in cols:
        v = cols["nebulosity"]
        bad = np.isfinite(v) & ((v < 0.0) | (v > 8.0))
        fix("nebulosity_range", bad)
        cols["nebulosity"] = np.clip(v, 0.0, 8.0)

    if "wet_bulb_temp" in cols and "dry_bulb_temp" in cols:
        wb, db = cols["wet_bulb_temp"], cols["dry_bulb_temp"]
        bad = np.isfinite(wb) & np.isfinite(db) & (wb > db + 1e-9)
        fix("wet_bulb_le_dry_bulb", bad)
        if np.any(bad):
            rh = cols.get("rel_humidity")
            pr = cols.get("pressure")
            fixed = wb.copy()
            for i in np.nonzero(bad)[0]:
                h = float(rh[i]) if rh is not None and np.isfinite(rh[i]) else 100.0
                p = float(pr[i]) if pr is not None and np.isfinite(pr[i]) else 1013.25
                fixed[i] = wet_bulb(float(db[i]), h, p)
            cols["wet_bulb_temp"] = np.minimum(fixed, db)

    total_repairs = sum(repairs.values())
    report = {
        "repairs": dict(sorted(repairs.items())),
        "total_repairs": total_repairs,
        "total_checks": checks,
        "violation_rate": (total_repairs / checks) if checks else 0.0,
        "n_rows": n,
    }
    return seq, report


# ---------------------------------------------------------------------------
# derived variables

def derive_variables(seq: GeneratedSequence, sky_temperature: bool = False) -> GeneratedSequence:
    """Add the wet-bulb column (and optionally a sky temperature).

    Sky temperature uses the Berdahl-Martin clear-sky emissivity on the dew
    point with a linear cloud-cover correction from nebulosity (octas/8):
    eps = eps_clear + 0.8 (n/8)(1 - eps_clear), Tsky = Tair eps^0.25 in Kelvin.
    """
    cols = seq.columns
    if "dry_bulb_temp" not in cols or "rel_humidity" not in cols:
        raise GenerationError("derived variables need dry_bulb_temp and rel_humidity")
    t = cols["dry_bulb_temp"]
    rh = cols["rel_humidity"]
    pr = cols.get("pressure")
    n = len(seq.timestamps)
    wb = np.full(n, np.nan)
    for i in range(n):
        if np.isfinite(t[i]) and np.isfinite(rh[i]):
            p = float(pr[i]) if pr is not None and np.isfinite(pr[i]) else 1013.25
            wb[i] = wet_bulb(float(t[i]), float(rh[i]), p)
    cols["wet_bulb_temp"] = wb

    if sky_temperature:
        from .climdata import dew_point

        neb = cols.get("nebulosity")
        sky = np.full(n, np.nan)
        for i in range(n):
            if not (np.isfinite(t[i]) and np.isfinite(rh[i])):
                continue
            tdp = dew_point(float(t[i]), float(rh[i]))
            eps_clear = 0.711 + 0.56 * (tdp / 100.0) + 0.73 * (tdp / 100.0) ** 2
            cover = float(neb[i]) / 8.0 if neb is not None and np.isfinite(neb[i]) else 0.0
            eps = min(1.0, eps_clear + 0.8 * cover * (1.0 - eps_clear))
            sky[i] = (t[i] + 273.15) * eps**0.25 - 273.15
        cols["sky_temp"] = sky
    return seq


# ---------------------------------------------------------------------------
# export / import

def _fmt(v: float) -> str:
    return "" if not math.isfinite(v) else repr(float(v))


def export(seq: GeneratedSequence, fmt: str, path) -> list[Path]:
    """Write the sequence as a provenance-stamped CSV or as per-variable
    (timestamp, value) plot-data files. Returns the written paths."""
    path = Path(path)
    names = seq.column_names()
    if fmt == "csv":
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["# climagen generated sequence"]
        for k in ("plan", "models", "version", "coherence"):
            if k in seq.provenance:
                lines.append(f"# {k}: {json.dumps(seq.provenance[k], sort_keys=True)}")
        lines.append(",".join(["timestamp"] + names))
        for i, ts in enumerate(seq.timestamps):
            row = [ts.isoformat()] + [_fmt(float(seq.columns[c][i])) for c in names]
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")
        return [path]
    if fmt == "plotdata":
        path.mkdir(parents=True, exist_ok=True)
        written = []
        for c in names:
            p = path / f"{c}.csv"
            lines = ["timestamp,value"]
            for i, ts in enumerate(seq.timestamps):
                lines.append(f"{ts.isoformat()},{_fmt(float(seq.columns[c][i]))}")
            p.write_text("\n".join(lines) + "\n")
            written.append(p)
        return written
    raise UsageError(f"unknown export format {fmt!r} (use csv or plotdata)")


def load_table(path) -> tuple[list[datetime], dict[str, np.ndarray]]:
    """Read a sequence/reference CSV back as (timestamps, columns); comment
    lines are skipped and empty cells become missing."""
    import csv as _csv

    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in _csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0][0] != "timestamp":
        raise UsageError(f"{path}: expected a 'timestamp'-headed CSV")
    header = rows[0]
    timestamps: list[datetime] = []
    cols: dict[str, list[float]] = {h: [] for h in header[1:]}
    for row in rows[1:]:
        timestamps.append(datetime.fromisoformat(row[0]))
        for j, h in enumerate(header[1:], start=1):
            cell = row[j].strip() if j < len(row) else ""
            try:
                cols[h].append(float(cell))
            except ValueError:
                cols[h].append(math.nan)
    return timestamps, {k: np.asarray(v) for k, v in cols.items()}
