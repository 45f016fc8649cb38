"""Pydantic request/response models for every pipeline endpoint.

The CLI builds these same models from its flags, so local and remote calls
share one contract.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class CriteriaModel(BaseModel):
    months: list[int] = Field(default_factory=lambda: list(range(1, 13)))
    hour_range: Optional[tuple[int, int]] = None
    predicates: list[tuple[str, float, float]] = Field(default_factory=list)


class SiteModel(BaseModel):
    name: str = "site"
    latitude: float
    longitude: float
    altitude: float = 0.0
    utc_offset: float = 0.0


# --- describe / bins ---------------------------------------------------------

class DescribeRequest(BaseModel):
    data: str
    variable: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    histogram_width: Optional[float] = None
    histogram_out: Optional[str] = None


class SummaryModel(BaseModel):
    mean: float
    std: float
    min: float
    max: float
    count: int
    missing_count: int
    degenerate: bool


class DescribeResponse(BaseModel):
    variable: str
    cadence: str
    summary: SummaryModel
    histogram_path: Optional[str] = None


class BinsRequest(BaseModel):
    data: str
    variable: str
    width: float
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    out: Optional[str] = None


class BinsResponse(BaseModel):
    variable: str
    width: float
    bins: list[tuple[float, int, float]]
    out_path: Optional[str] = None


# --- fits --------------------------------------------------------------------

class FitDistRequest(BaseModel):
    data: str
    variable: str
    law: str  # weibull | saunier | gaussian
    registry: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    site: Optional[SiteModel] = None
    kt_max: Optional[float] = None
    alpha: float = 0.05
    gof_bins: int = 12


class GofModel(BaseModel):
    statistic: float
    dof: int
    p_value: float
    passed: bool


class FitDistResponse(BaseModel):
    key: str
    law: str
    params: dict
    gof: Optional[GofModel] = None
    n: int


class FitCorrRequest(BaseModel):
    data: str
    response: str
    predictors: list[str]
    template: str = "multilinear"
    registry: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    alpha: float = 0.05
    site: Optional[SiteModel] = None  # lets clearness_index / sunshine_fraction be derived
    error_surface_out: Optional[str] = None
    error_surface_bins: int = 10


class FitCorrResponse(BaseModel):
    key: str
    template: str
    coefficients: list[float]
    r2: float
    f_statistic: float
    f_pass: bool
    t_statistics: list[float]
    t_pass: list[bool]
    residual_std: float
    n: int
    error_surface_path: Optional[str] = None


class FitArmaRequest(BaseModel):
    data: str
    variable: str
    registry: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    p: Optional[int] = None
    q: Optional[int] = None
    max_lag: int = 20
    acf_out: Optional[str] = None  # per-lag ACF/PACF plot data CSV


class FitArmaResponse(BaseModel):
    key: str
    identified_kind: str
    identified_p: int
    identified_q: int
    white_noise: bool
    p: int
    q: int
    phi: list[float]
    theta: list[float]
    noise_sigma: float
    flags: list[str]
    residual_check_pass: bool
    residual_exceedances: int
    ljung_box_p: float
    acf: list[float]
    pacf: list[float]
    bartlett_bounds: list[float]
    quenouille_bound: float
    acf_path: Optional[str] = None


class FitNnRequest(BaseModel):
    data: str
    variable: str
    inputs: Optional[list[str]] = None
    registry: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    n_hidden: int = 3
    seed: int = 0
    max_iter: int = 200


class FitNnResponse(BaseModel):
    key: str
    inputs: list[str]
    n_hidden: int
    eqm: float
    iterations: int
    stop_reason: str
    n: int


class SweepNnRequest(BaseModel):
    data: str
    variable: str
    inputs: Optional[list[str]] = None
    registry: str
    schema_map: Optional[dict[str, str]] = None
    missing_sentinel: float = -999.0
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    hidden_min: int = 1
    hidden_max: int = 8
    seed: int = 0
    max_iter: int = 200


class SweepEntryModel(BaseModel):
    n_hidden: int
    train_eqm: float
    val_eqm: float


class SweepNnResponse(BaseModel):
    key: str
    best_hidden: int
    entries: list[SweepEntryModel]


# --- generation / validation / export ----------------------------------------

class PlanModel(BaseModel):
    site: SiteModel
    variables: list[str]
    start: str  # ISO timestamp
    duration: int
    cadence: str = "hourly"
    criteria: CriteriaModel = Field(default_factory=CriteriaModel)
    seed: int = 0
    overrides: dict[str, str] = Field(default_factory=dict)
    sky_temperature: bool = False
    resample_gate: Optional[dict] = None


class GenerateRequest(BaseModel):
    plan: PlanModel
    registry: str
    out: str
    plotdata_out: Optional[str] = None


class GenerateResponse(BaseModel):
    out_path: str
    plotdata_paths: list[str] = Field(default_factory=list)
    n_rows: int
    columns: list[str]
    models: dict[str, str]
    total_repairs: int
    seed: int


class ValidateRequest(BaseModel):
    generated: str
    reference: str
    alpha: float = 0.05
    site: Optional[SiteModel] = None
    report_out: Optional[str] = None


class ValidateResponse(BaseModel):
    passed: bool
    report: dict
    text: str
    report_path: Optional[str] = None


class ExportRequest(BaseModel):
    sequence: str
    format: str = "plotdata"  # csv | plotdata
    out: str


class ExportResponse(BaseModel):
    paths: list[str]


class RegistryListRequest(BaseModel):
    registry: str


class RegistryEntryModel(BaseModel):
    key: str
    variable: str
    kind: str
    months: list[int]
    fit_date: str


class RegistryListResponse(BaseModel):
    entries: list[RegistryEntryModel]


class HealthResponse(BaseModel):
    status: str
    version: str
