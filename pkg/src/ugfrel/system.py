"""System assembly and adequacy indices.

All sources, the EV aggregation and the transformer feed the load in
parallel; generation is their PLUS composition. A renewable fleet shares one
source state, so its source u-function multiplies the PLUS-fold of the
independent mechanical u-functions.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

from .components import (
    EVAggregationSpec,
    LoadSpec,
    SolarGeneratorSpec,
    TransformerSpec,
    WindTurbineSpec,
    ev_aggregation_ufunction,
    ev_mechanical_ufunction,
    ev_operation_ufunction,
    load_ufunction,
    solar_mechanical_ufunctions,
    solar_source_ufunction,
    transformer_ufunction,
    wind_mechanical_ufunctions,
    wind_source_ufunction,
)
from .ugf import (
    DEFAULT_REL_TOL,
    PLUS,
    TIMES,
    ModelInputError,
    UFunction,
    compose,
    compose_all,
    degenerate,
    psi_availability,
    redundant_states,
    shortfall,
)

logger = logging.getLogger("ugfrel.system")

DEFAULT_HORIZON_HOURS = 8760
COMPONENTS = ("solar", "wind", "ev", "transformer", "load")


class EmptyMechList(ModelInputError):
    pass


class ComponentError(ModelInputError):
    def __init__(self, component: str, cause: Exception) -> None:
        super().__init__(f"{component}: {cause}")
        self.component = component
        self.cause = cause


@dataclass(frozen=True)
class SystemConfig:
    load: LoadSpec
    solar: Optional[SolarGeneratorSpec] = None
    solar_count: int = 0
    wind: Optional[WindTurbineSpec] = None
    wind_count: int = 0
    ev: Optional[EVAggregationSpec] = None
    transformer: Optional[TransformerSpec] = None
    horizon_hours: Optional[int] = None
    strict_loss: bool = True
    rel_tol: float = DEFAULT_REL_TOL
    name: str = ""

    def __post_init__(self) -> None:
        if self.solar_count < 0 or self.wind_count < 0:
            raise ModelInputError("generator counts must be >= 0")
        if self.solar_count and self.solar is None:
            raise ModelInputError("solar_count > 0 needs a solar spec")
        if self.wind_count and self.wind is None:
            raise ModelInputError("wind_count > 0 needs a wind spec")
        if self.horizon_hours is not None and self.horizon_hours < 1:
            raise ModelInputError("horizon_hours must be >= 1")

    @property
    def horizon(self) -> int:
        if self.horizon_hours is not None:
            return self.horizon_hours
        return self.load.n_hours or DEFAULT_HORIZON_HOURS


class StateCounts(NamedTuple):
    solar: int
    wind: int
    ev: int
    transformer: int
    generation: int


@dataclass(frozen=True)
class ReliabilityReport:
    lole: float
    eens: float
    loss_probability: float
    expected_unserved_kw: float
    generation_ufunction: UFunction
    load_ufunction: UFunction
    state_counts: StateCounts
    horizon_hours: int
    strict_loss: bool
    availability_at_peak: float
    component_ufunctions: dict[str, UFunction] = field(default_factory=dict)
    redundant: dict[str, int] = field(default_factory=dict)

    @property
    def eens_mwh(self) -> float:
        return self.eens / 1000.0


class _Built(NamedTuple):
    ufunction: UFunction
    input_term_counts: tuple[int, ...]


def combined_renewables(
    source_u: UFunction,
    mech_us: Sequence[UFunction],
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    if not mech_us:
        raise EmptyMechList("a renewable fleet needs at least one mechanical u-function")
    fleet = compose_all(list(mech_us), PLUS, rel_tol=rel_tol)
    return compose(source_u, fleet, TIMES, rel_tol=rel_tol)


def system_generation(
    u_s: UFunction,
    u_w: UFunction,
    u_ev: UFunction,
    u_t: UFunction,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    return compose_all([u_s, u_w, u_ev, u_t], PLUS, rel_tol=rel_tol)


def lole(u_g: UFunction, u_l: UFunction, horizon_hours: int, strict: bool = True) -> float:
    """Loss-of-load expectation in hours over ``horizon_hours``."""
    return horizon_hours * shortfall(u_g, u_l, strict).loss_probability


def eens(u_g: UFunction, u_l: UFunction, horizon_hours: int, strict: bool = True) -> float:
    """Expected energy not supplied in kWh over ``horizon_hours``."""
    return horizon_hours * shortfall(u_g, u_l, strict).expected_unserved


def availability(u_g: UFunction, demand: float) -> float:
    return psi_availability(u_g, demand)


def _build_solar(config: SystemConfig) -> _Built:
    if config.solar is None or config.solar_count == 0:
        return _Built(degenerate(0.0), (1,))
    source = solar_source_ufunction(config.solar, rel_tol=config.rel_tol)
    mechs = solar_mechanical_ufunctions(config.solar, config.solar_count)
    u = combined_renewables(source, mechs, rel_tol=config.rel_tol)
    return _Built(u, (len(source), *(len(m) for m in mechs)))


def _build_wind(config: SystemConfig) -> _Built:
    if config.wind is None or config.wind_count == 0:
        return _Built(degenerate(0.0), (1,))
    source = wind_source_ufunction(config.wind, rel_tol=config.rel_tol)
    mechs = wind_mechanical_ufunctions(config.wind, config.wind_count)
    u = combined_renewables(source, mechs, rel_tol=config.rel_tol)
    return _Built(u, (len(source), *(len(m) for m in mechs)))


def _build_ev(config: SystemConfig) -> _Built:
    if config.ev is None:
        return _Built(degenerate(0.0), (1,))
    u = ev_aggregation_ufunction(config.ev, rel_tol=config.rel_tol)
    return _Built(u, (len(ev_operation_ufunction(config.ev)), len(ev_mechanical_ufunction(config.ev))))


def _build_transformer(config: SystemConfig) -> _Built:
    if config.transformer is None:
        return _Built(degenerate(0.0), (1,))
    u = transformer_ufunction(config.transformer)
    return _Built(u, (len(u),))


def _build_load(config: SystemConfig) -> _Built:
    u = load_ufunction(config.load)
    return _Built(u, (len(u),))


_BUILDERS: dict[str, Callable[[SystemConfig], _Built]] = {
    "solar": _build_solar,
    "wind": _build_wind,
    "ev": _build_ev,
    "transformer": _build_transformer,
    "load": _build_load,
}


def _run_builder(name: str, config: SystemConfig) -> _Built:
    try:
        return _BUILDERS[name](config)
    except ComponentError:
        raise
    except ModelInputError as exc:
        raise ComponentError(name, exc) from exc


def _build_all(config: SystemConfig, workers: int) -> dict[str, _Built]:
    if workers <= 1:
        return {name: _run_builder(name, config) for name in COMPONENTS}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {name: pool.submit(_run_builder, name, config) for name in COMPONENTS}
        # collected in fixed order so the first failing component wins deterministically
        return {name: futures[name].result() for name in COMPONENTS}


def build_components(config: SystemConfig, *, workers: int = 1) -> dict[str, UFunction]:
    return {name: built.ufunction for name, built in _build_all(config, workers).items()}


def assess(config: SystemConfig, *, workers: int = 1) -> ReliabilityReport:
    started = time.perf_counter()
    built = _build_all(config, workers)
    parts = {name: b.ufunction for name, b in built.items()}
    u_g = system_generation(
        parts["solar"], parts["wind"], parts["ev"], parts["transformer"], rel_tol=config.rel_tol
    )
    u_l = parts["load"]
    sf = shortfall(u_g, u_l, config.strict_loss)
    horizon = config.horizon

    redundant = {name: redundant_states(built[name].input_term_counts, parts[name]) for name in COMPONENTS}
    gen_inputs = [len(parts[name]) for name in ("solar", "wind", "ev", "transformer")]
    redundant["generation"] = redundant_states(gen_inputs, u_g)
    counts = StateCounts(
        solar=len(parts["solar"]),
        wind=len(parts["wind"]),
        ev=len(parts["ev"]),
        transformer=len(parts["transformer"]),
        generation=len(u_g),
    )
    report = ReliabilityReport(
        lole=horizon * sf.loss_probability,
        eens=horizon * sf.expected_unserved,
        loss_probability=sf.loss_probability,
        expected_unserved_kw=sf.expected_unserved,
        generation_ufunction=u_g,
        load_ufunction=u_l,
        state_counts=counts,
        horizon_hours=horizon,
        strict_loss=config.strict_loss,
        availability_at_peak=availability(u_g, u_l.max_value),
        component_ufunctions={name: parts[name] for name in ("solar", "wind", "ev", "transformer")},
        redundant=redundant,
    )
    logger.info(
        "assessment complete",
        extra={
            "extra": {
                "config": config.name,
                "lole_h": report.lole,
                "eens_kwh": report.eens,
                "generation_terms": counts.generation,
                "elapsed_s": round(time.perf_counter() - started, 4),
            }
        },
    )
    return report
