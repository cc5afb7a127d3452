"""JSON system description (version 1) and its translation to :class:`SystemConfig`."""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .components import (
    TABLE_MASS_TOLERANCE,
    EVAggregationSpec,
    LoadSpec,
    SolarGeneratorSpec,
    SolarPanelParams,
    SourceTable,
    TransformerSpec,
    WindCurveParams,
    WindTurbineSpec,
)
from .loadcsv import read_load_series
from .stochastic import (
    BetaParams,
    FixedAvailability,
    MarkovGenerator,
    Mechanics,
    TwoStateRates,
    WeibullParams,
    fit_beta_moments,
)
from .system import SystemConfig
from .ugf import DEFAULT_REL_TOL, ModelInputError

DEFAULT_LOAD_STATES = 10


class ConfigDocumentError(ModelInputError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RatesModel(_Section):
    failure_rate: float = Field(ge=0)
    repair_rate: float = Field(ge=0)
    per: Literal["hour", "year"]


class AvailabilityModel(_Section):
    availability: float = Field(ge=0, le=1)


MechanicalModel = Union[RatesModel, AvailabilityModel]


class BetaModel(_Section):
    alpha: Optional[float] = Field(default=None, gt=0)
    beta: Optional[float] = Field(default=None, gt=0)
    mean: Optional[float] = None
    variance: Optional[float] = None

    @model_validator(mode="after")
    def _one_form(self) -> "BetaModel":
        shapes = (self.alpha, self.beta)
        moments = (self.mean, self.variance)
        if not (None not in shapes and moments == (None, None)) and not (
            None not in moments and shapes == (None, None)
        ):
            raise ValueError("give either alpha and beta, or mean and variance")
        return self


class PanelModel(_Section):
    k_v: float
    k_i: float
    i_sc: float = Field(gt=0)
    v_oc: float = Field(gt=0)
    i_mpp: float = Field(gt=0)
    v_mpp: float = Field(gt=0)
    n_ot: float
    t_a: float


class SolarModel(_Section):
    count: int = Field(ge=0)
    n_modules: int = Field(ge=1)
    granularity: Literal["generator", "module"] = "generator"
    mechanical: MechanicalModel
    table: Optional[list[tuple[float, float, float]]] = None
    beta: Optional[BetaModel] = None
    n_states: Optional[int] = Field(default=None, ge=1)
    max: float = Field(default=1.0, gt=0)
    panel: Optional[PanelModel] = None

    @model_validator(mode="after")
    def _one_source(self) -> "SolarModel":
        if (self.table is None) == (self.beta is None):
            raise ValueError("solar needs exactly one of 'table' or 'beta'")
        if self.beta is not None and (self.panel is None or self.n_states is None):
            raise ValueError("a 'beta' solar source needs 'panel' and 'n_states'")
        if self.table is not None and (
            self.panel is not None or self.n_states is not None or "max" in self.model_fields_set
        ):
            raise ValueError("a 'table' solar source takes no 'panel', 'n_states' or 'max'")
        return self


class WeibullModel(_Section):
    k: float = Field(gt=0)
    c: float = Field(gt=0)


class CurveModel(_Section):
    v_ci: float = Field(ge=0)
    v_r: float
    v_co: float
    p_r: float = Field(gt=0)


class WindModel(_Section):
    count: int = Field(ge=0)
    granularity: Literal["generator"] = "generator"
    mechanical: MechanicalModel
    table: Optional[list[tuple[float, float, float]]] = None
    weibull: Optional[WeibullModel] = None
    n_states: Optional[int] = Field(default=None, ge=1)
    max: Optional[float] = Field(default=None, gt=0)
    curve: Optional[CurveModel] = None

    @model_validator(mode="after")
    def _one_source(self) -> "WindModel":
        if (self.table is None) == (self.weibull is None):
            raise ValueError("wind needs exactly one of 'table' or 'weibull'")
        if self.weibull is not None and (self.curve is None or self.n_states is None):
            raise ValueError("a 'weibull' wind source needs 'curve' and 'n_states'")
        if self.table is not None and (self.n_states is not None or self.max is not None):
            raise ValueError("a 'table' wind source takes no 'n_states' or 'max'")
        return self


class EVModel(_Section):
    n_ev: int = Field(ge=1)
    p_v: float = Field(gt=0)
    residence_hours: tuple[float, float, float]
    per_ev: bool = False
    mechanical: MechanicalModel


class MarkovModel(_Section):
    rates: list[list[float]]
    per: Literal["hour", "year"]
    capacity_fractions: list[float]

    @model_validator(mode="after")
    def _shapes(self) -> "MarkovModel":
        n = len(self.rates)
        if n == 0 or any(len(row) != n for row in self.rates):
            raise ValueError(f"'rates' must be a square matrix, got rows of length {[len(r) for r in self.rates]}")
        if len(self.capacity_fractions) != n:
            raise ValueError(f"'capacity_fractions' needs {n} entries, got {len(self.capacity_fractions)}")
        return self


class TransformerModel(_Section):
    rated_kw: float = Field(gt=0)
    mechanical: Optional[MechanicalModel] = None
    markov: Optional[MarkovModel] = None

    @model_validator(mode="after")
    def _one_model(self) -> "TransformerModel":
        if (self.mechanical is None) == (self.markov is None):
            raise ValueError("transformer needs exactly one of 'mechanical' or 'markov'")
        return self


class LoadModel(_Section):
    csv: Optional[str] = None
    n_states: Optional[int] = Field(default=None, ge=1)
    table: Optional[list[tuple[float, float]]] = None

    @model_validator(mode="after")
    def _one_source(self) -> "LoadModel":
        if (self.csv is None) == (self.table is None):
            raise ValueError("load needs exactly one of 'csv' or 'table'")
        if self.table is not None and self.n_states is not None:
            raise ValueError("a 'table' load takes no 'n_states'")
        return self


class IndicesModel(_Section):
    horizon_hours: Optional[int] = Field(default=None, ge=1)
    strict_loss: bool = True


class ConfigDocument(_Section):
    version: Literal[1]
    name: str = ""
    solar: Optional[SolarModel] = None
    wind: Optional[WindModel] = None
    ev: Optional[EVModel] = None
    transformer: Optional[TransformerModel] = None
    load: LoadModel
    indices: IndicesModel = IndicesModel()


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<document>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_document(text: str, source: str = "<string>") -> ConfigDocument:
    try:
        return ConfigDocument.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigDocumentError(f"{source}: {_format_validation(exc)}") from exc


def load_document(path: Path) -> ConfigDocument:
    path = path.expanduser()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigDocumentError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    return parse_document(text, str(path))


def _mechanics(model: MechanicalModel) -> Mechanics:
    if isinstance(model, RatesModel):
        return TwoStateRates(model.failure_rate, model.repair_rate, model.per)
    return FixedAvailability(model.availability)


def _solar(model: SolarModel, mass_tolerance: float) -> SolarGeneratorSpec:
    mech = _mechanics(model.mechanical)
    if model.table is not None:
        return SolarGeneratorSpec(
            n_modules=model.n_modules,
            mech=mech,
            table=SourceTable(tuple(model.table), mass_tolerance),
            granularity=model.granularity,
        )
    b = model.beta
    if b.alpha is not None:
        irradiance = BetaParams(b.alpha, b.beta)
    else:
        irradiance = fit_beta_moments(b.mean, b.variance)
    return SolarGeneratorSpec(
        n_modules=model.n_modules,
        mech=mech,
        irradiance=irradiance,
        panel=SolarPanelParams(**model.panel.model_dump()),
        n_states=model.n_states,
        max_value=model.max,
        granularity=model.granularity,
    )


def _wind(model: WindModel, mass_tolerance: float) -> WindTurbineSpec:
    mech = _mechanics(model.mechanical)
    curve = WindCurveParams(**model.curve.model_dump()) if model.curve is not None else None
    if model.table is not None:
        return WindTurbineSpec(mech=mech, table=SourceTable(tuple(model.table), mass_tolerance), curve=curve)
    return WindTurbineSpec(
        mech=mech,
        wind=WeibullParams(model.weibull.k, model.weibull.c),
        curve=curve,
        n_states=model.n_states,
        max_value=model.max,
    )


def _transformer(model: TransformerModel) -> TransformerSpec:
    if model.mechanical is not None:
        return TransformerSpec(model.rated_kw, mech=_mechanics(model.mechanical))
    m = model.markov
    return TransformerSpec(
        model.rated_kw,
        markov=MarkovGenerator.from_rates(m.rates, m.per),
        capacity_fractions=tuple(m.capacity_fractions),
    )


def _load(model: LoadModel, base_dir: Path, load_csv: Optional[Path], mass_tolerance: float) -> LoadSpec:
    n_states = model.n_states or DEFAULT_LOAD_STATES
    if load_csv is not None:
        return LoadSpec(hourly_kw=read_load_series(load_csv), n_states=n_states)
    if model.table is not None:
        return LoadSpec(table=tuple(model.table), mass_tolerance=mass_tolerance)
    path = Path(model.csv).expanduser()
    if not path.is_absolute():
        path = base_dir / path
    return LoadSpec(hourly_kw=read_load_series(path), n_states=n_states)


def to_system_config(
    doc: ConfigDocument,
    *,
    base_dir: Path = Path("."),
    load_csv: Optional[Path] = None,
    strict_loss: Optional[bool] = None,
    table_mass_tolerance: float = TABLE_MASS_TOLERANCE,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SystemConfig:
    """Build the engine config; ``load_csv`` and ``strict_loss`` override the document."""
    return SystemConfig(
        load=_load(doc.load, base_dir, load_csv, table_mass_tolerance),
        solar=_solar(doc.solar, table_mass_tolerance) if doc.solar else None,
        solar_count=doc.solar.count if doc.solar else 0,
        wind=_wind(doc.wind, table_mass_tolerance) if doc.wind else None,
        wind_count=doc.wind.count if doc.wind else 0,
        ev=EVAggregationSpec(
            n_ev=doc.ev.n_ev,
            p_v=doc.ev.p_v,
            residence_hours=doc.ev.residence_hours,
            mech=_mechanics(doc.ev.mechanical),
            per_ev=doc.ev.per_ev,
        )
        if doc.ev
        else None,
        transformer=_transformer(doc.transformer) if doc.transformer else None,
        horizon_hours=doc.indices.horizon_hours,
        strict_loss=doc.indices.strict_loss if strict_loss is None else strict_loss,
        rel_tol=rel_tol,
        name=doc.name,
    )


def load_system_config(path: Path, **overrides) -> SystemConfig:
    path = path.expanduser()
    doc = load_document(path)
    return to_system_config(doc, base_dir=path.resolve().parent, **overrides)

