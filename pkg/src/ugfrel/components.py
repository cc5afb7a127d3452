"""Component u-function builders.

Each builder turns a component spec into a canonical :class:`UFunction`:
PV and wind sources (parametric or tabulated), binomial mechanical models,
the EV aggregation, the grid transformer and the multi-state load model.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .stochastic import (
    BetaParams,
    DiscretizedDistribution,
    MarkovGenerator,
    Mechanics,
    WeibullParams,
    discretize,
    steady_state_general,
)
from .ugf import (
    DEFAULT_REL_TOL,
    TIMES,
    MassNotNormalized,
    ModelInputError,
    UFunction,
    compose,
    degenerate,
    from_arrays,
)

logger = logging.getLogger("ugfrel.components")

TABLE_MASS_TOLERANCE = 0.01


class UnmappedState(ModelInputError):
    pass


class AllResidenceZero(ModelInputError):
    pass


class DegenerateSeries(ModelInputError):
    pass


class InvalidComponentSpec(ModelInputError):
    pass


PowerMap = Union[Callable[[np.ndarray], np.ndarray], Mapping, Sequence[tuple[float, float]]]


# ---------------------------------------------------------------------------
# Physics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolarPanelParams:
    k_v: float
    k_i: float
    i_sc: float
    v_oc: float
    i_mpp: float
    v_mpp: float
    n_ot: float
    t_a: float

    def __post_init__(self) -> None:
        if not (self.i_sc > 0 and self.v_oc > 0):
            raise InvalidComponentSpec("panel needs i_sc > 0 and v_oc > 0")
        if not 0.0 < self.fill_factor < 1.0:
            raise InvalidComponentSpec(f"fill factor {self.fill_factor!r} outside (0, 1)")

    @property
    def fill_factor(self) -> float:
        return (self.v_mpp * self.i_mpp) / (self.v_oc * self.i_sc)


def pv_module_power(s, panel: SolarPanelParams):
    """kW delivered by one module at irradiance ``s`` (kW/m^2); scalar or array."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ModelInputError("irradiance must be >= 0")
    t_c = panel.t_a + s * (panel.n_ot - 20.0) / 0.8
    i_y = s * (panel.i_sc + panel.k_i * (t_c - 25.0))
    v_y = panel.v_oc - panel.k_v * t_c
    kw = np.maximum(panel.fill_factor * v_y * i_y, 0.0) / 1000.0
    return float(kw) if kw.ndim == 0 else kw


@dataclass(frozen=True)
class WindCurveParams:
    v_ci: float
    v_r: float
    v_co: float
    p_r: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.v_ci < self.v_r < self.v_co:
            raise InvalidComponentSpec(
                f"wind curve needs 0 <= v_ci < v_r < v_co, got ({self.v_ci}, {self.v_r}, {self.v_co})"
            )
        if not self.p_r > 0:
            raise InvalidComponentSpec("rated power must be > 0")


def wind_power(v, curve: WindCurveParams):
    """Piecewise-linear turbine output (kW) at wind speed ``v`` (km/h)."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ModelInputError("wind speed must be >= 0")
    ramp = curve.p_r * (v - curve.v_ci) / (curve.v_r - curve.v_ci)
    kw = np.where(
        v < curve.v_ci,
        0.0,
        np.where(v < curve.v_r, ramp, np.where(v < curve.v_co, curve.p_r, 0.0)),
    )
    return float(kw) if kw.ndim == 0 else kw


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceTable:
    """Printed source model: rows of (state value, probability, power kW)."""

    rows: tuple[tuple[float, float, float], ...]
    mass_tolerance: float = TABLE_MASS_TOLERANCE

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(x) for x in row) for row in self.rows)
        if not rows:
            raise InvalidComponentSpec("source table is empty")
        if any(len(row) != 3 for row in rows):
            raise InvalidComponentSpec("source table rows need (state, probability, power)")
        if any(row[1] < 0 for row in rows):
            raise InvalidComponentSpec("source table probabilities must be >= 0")
        if any(row[2] < 0 or not math.isfinite(row[2]) for row in rows):
            raise InvalidComponentSpec("source table powers must be finite and >= 0")
        if len({row[0] for row in rows}) != len(rows):
            raise InvalidComponentSpec("source table state values must be distinct")
        object.__setattr__(self, "rows", rows)

    def distribution(self) -> DiscretizedDistribution:
        probs = np.array([row[1] for row in self.rows])
        mass = math.fsum(probs.tolist())
        if abs(mass - 1.0) > self.mass_tolerance:
            raise MassNotNormalized(f"source table probabilities sum to {mass!r}")
        if abs(mass - 1.0) > 1e-6:
            logger.warning("renormalizing printed source table", extra={"extra": {"mass": mass}})
        return DiscretizedDistribution(np.array([row[0] for row in self.rows]), probs / mass)

    def power_map(self) -> list[tuple[float, float]]:
        return [(row[0], row[2]) for row in self.rows]


def _map_power(values: np.ndarray, power_map: PowerMap) -> np.ndarray:
    if callable(power_map):
        return np.broadcast_to(np.asarray(power_map(values), dtype=np.float64), values.shape).copy()
    pairs = list(power_map.items()) if isinstance(power_map, Mapping) else list(power_map)
    table = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    out = np.empty_like(values)
    for i, state in enumerate(values):
        hit = np.flatnonzero(np.isclose(table[:, 0], state, rtol=1e-9, atol=1e-12))
        if hit.size == 0:
            raise UnmappedState(f"no power entry for state value {state!r}")
        out[i] = table[hit[0], 1]
    return out


def source_ufunction(
    dist: DiscretizedDistribution,
    power_map: PowerMap,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    power = _map_power(dist.state_values, power_map)
    return from_arrays(power, dist.state_probs, rel_tol=rel_tol)


def mechanical_ufunction(n_units: int, per_unit_value: float, availability: float) -> UFunction:
    """Binomial count of working units among ``n_units``, each worth ``per_unit_value``."""
    if n_units < 1:
        raise InvalidComponentSpec(f"n_units must be >= 1, got {n_units!r}")
    if not 0.0 <= availability <= 1.0:
        raise ModelInputError(f"availability must be in [0, 1], got {availability!r}")
    k = np.arange(n_units + 1)
    return from_arrays(k * float(per_unit_value), stats.binom.pmf(k, n_units, availability))


@dataclass(frozen=True)
class SolarGeneratorSpec:
    """One PV generator of ``n_modules`` modules.

    The source is either ``table`` or ``irradiance`` (+ ``panel``). With
    ``granularity="generator"`` the whole generator is one two-state block;
    with ``"module"`` every module fails independently.
    """

    n_modules: int
    mech: Mechanics
    table: Optional[SourceTable] = None
    irradiance: Union[BetaParams, DiscretizedDistribution, None] = None
    panel: Optional[SolarPanelParams] = None
    n_states: int = 5
    max_value: float = 1.0
    granularity: str = "generator"

    def __post_init__(self) -> None:
        if self.n_modules < 1:
            raise InvalidComponentSpec("n_modules must be >= 1")
        if (self.table is None) == (self.irradiance is None):
            raise InvalidComponentSpec("solar source needs exactly one of table or irradiance")
        if self.irradiance is not None and self.panel is None:
            raise InvalidComponentSpec("parametric solar source needs panel parameters")
        if self.granularity not in ("generator", "module"):
            raise InvalidComponentSpec(f"unknown solar granularity {self.granularity!r}")


def solar_distribution(spec: SolarGeneratorSpec) -> DiscretizedDistribution:
    if spec.table is not None:
        return spec.table.distribution()
    if isinstance(spec.irradiance, DiscretizedDistribution):
        return spec.irradiance
    return discretize(spec.irradiance, spec.n_states, spec.max_value)


def solar_power_map(spec: SolarGeneratorSpec) -> PowerMap:
    if spec.table is not None:
        return spec.table.power_map()
    panel = spec.panel
    return lambda s: pv_module_power(s, panel)


def solar_source_ufunction(spec: SolarGeneratorSpec, *, rel_tol: float = DEFAULT_REL_TOL) -> UFunction:
    """Per-module output over the shared irradiance states."""
    return source_ufunction(solar_distribution(spec), solar_power_map(spec), rel_tol=rel_tol)


def solar_mechanical_ufunction(spec: SolarGeneratorSpec) -> UFunction:
    a = spec.mech.availability
    if spec.granularity == "module":
        return mechanical_ufunction(spec.n_modules, 1.0, a)
    return mechanical_ufunction(1, spec.n_modules, a)


def solar_mechanical_ufunctions(spec: SolarGeneratorSpec, count: int) -> list[UFunction]:
    return [solar_mechanical_ufunction(spec)] * count


@dataclass(frozen=True)
class WindTurbineSpec:
    mech: Mechanics
    table: Optional[SourceTable] = None
    wind: Union[WeibullParams, DiscretizedDistribution, None] = None
    curve: Optional[WindCurveParams] = None
    n_states: int = 5
    max_value: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.table is None) == (self.wind is None):
            raise InvalidComponentSpec("wind source needs exactly one of table or wind")
        if self.wind is not None and self.curve is None:
            raise InvalidComponentSpec("parametric wind source needs a power curve")
        if self.table is not None and self.curve is not None:
            if any(row[2] > self.curve.p_r for row in self.table.rows):
                raise InvalidComponentSpec("wind table power exceeds rated power")


def default_wind_max(spec: WindTurbineSpec) -> float:
    """Truncation speed putting v_co on the upper edge of the second-to-last interval."""
    if spec.curve is None:
        return 4.0 * spec.wind.c
    if spec.n_states == 1:
        return spec.curve.v_co
    return spec.curve.v_co * spec.n_states / (spec.n_states - 1)


def wind_distribution(spec: WindTurbineSpec) -> DiscretizedDistribution:
    if spec.table is not None:
        return spec.table.distribution()
    if isinstance(spec.wind, DiscretizedDistribution):
        return spec.wind
    upper = spec.max_value if spec.max_value is not None else default_wind_max(spec)
    return discretize(spec.wind, spec.n_states, upper)


def wind_power_map(spec: WindTurbineSpec) -> PowerMap:
    if spec.table is not None:
        return spec.table.power_map()
    curve = spec.curve
    return lambda v: wind_power(v, curve)


def wind_source_ufunction(spec: WindTurbineSpec, *, rel_tol: float = DEFAULT_REL_TOL) -> UFunction:
    return source_ufunction(wind_distribution(spec), wind_power_map(spec), rel_tol=rel_tol)


def wind_mechanical_ufunctions(spec: WindTurbineSpec, count: int) -> list[UFunction]:
    return [mechanical_ufunction(1, 1.0, spec.mech.availability)] * count


# ---------------------------------------------------------------------------
# EV aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EVAggregationSpec:
    n_ev: int
    p_v: float
    residence_hours: tuple[float, float, float]
    mech: Mechanics
    per_ev: bool = False

    def __post_init__(self) -> None:
        if self.n_ev < 1:
            raise InvalidComponentSpec("n_ev must be >= 1")
        if not self.p_v > 0:
            raise InvalidComponentSpec("p_v must be > 0")
        hours = tuple(float(h) for h in self.residence_hours)
        if len(hours) != 3 or any(h < 0 or not math.isfinite(h) for h in hours):
            raise InvalidComponentSpec("residence_hours needs three finite values >= 0")
        object.__setattr__(self, "residence_hours", hours)


def ev_operation_ufunction(spec: EVAggregationSpec) -> UFunction:
    """Charging, disconnected and discharging states at -p_v, 0 and +p_v."""
    hours = np.asarray(spec.residence_hours)
    total = math.fsum(hours.tolist())
    if total <= 0:
        raise AllResidenceZero("EV residence hours are all zero")
    return from_arrays([-spec.p_v, 0.0, spec.p_v], hours / total)


def ev_mechanical_ufunction(spec: EVAggregationSpec) -> UFunction:
    a = spec.mech.availability
    if spec.per_ev:
        return mechanical_ufunction(spec.n_ev, 1.0, a)
    return mechanical_ufunction(1, spec.n_ev, a)


def ev_aggregation_ufunction(spec: EVAggregationSpec, *, rel_tol: float = DEFAULT_REL_TOL) -> UFunction:
    return compose(ev_operation_ufunction(spec), ev_mechanical_ufunction(spec), TIMES, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# Transformer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformerSpec:
    rated_kw: float
    mech: Optional[Mechanics] = None
    markov: Optional[MarkovGenerator] = None
    capacity_fractions: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.rated_kw > 0:
            raise InvalidComponentSpec("rated_kw must be > 0")
        if (self.mech is None) == (self.markov is None):
            raise InvalidComponentSpec("transformer needs exactly one of mech or markov")
        if self.markov is not None:
            fractions = tuple(float(f) for f in (self.capacity_fractions or ()))
            if len(fractions) != self.markov.n_states:
                raise InvalidComponentSpec("need one capacity fraction per Markov state")
            if any(not 0.0 <= f <= 1.0 for f in fractions):
                raise InvalidComponentSpec("capacity fractions must be in [0, 1]")
            object.__setattr__(self, "capacity_fractions", fractions)

    def state_probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """(capacity kW, probability) per transformer state."""
        if self.markov is not None:
            return np.asarray(self.capacity_fractions) * self.rated_kw, steady_state_general(self.markov)
        a = self.mech.availability
        return np.array([0.0, self.rated_kw]), np.array([1.0 - a, a])


def transformer_ufunction(spec: TransformerSpec) -> UFunction:
    values, probs = spec.state_probabilities()
    return from_arrays(values, probs)


# ---------------------------------------------------------------------------
# Load
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LoadSpec:
    """Hourly series grouped into ``n_states`` intervals, or a printed (kW, prob) table."""

    hourly_kw: Optional[np.ndarray] = None
    n_states: int = 10
    table: Optional[tuple[tuple[float, float], ...]] = None
    mass_tolerance: float = TABLE_MASS_TOLERANCE

    def __post_init__(self) -> None:
        if (self.hourly_kw is None) == (self.table is None):
            raise InvalidComponentSpec("load needs exactly one of hourly_kw or table")
        if self.n_states < 1:
            raise InvalidComponentSpec("n_states must be >= 1")
        if self.hourly_kw is not None:
            series = np.array(self.hourly_kw, dtype=np.float64).ravel()
            if not np.all(np.isfinite(series)) or np.any(series < 0):
                raise InvalidComponentSpec("load values must be finite and >= 0")
            series.setflags(write=False)
            object.__setattr__(self, "hourly_kw", series)
        else:
            rows = tuple((float(kw), float(p)) for kw, p in self.table)
            if not rows or any(kw < 0 for kw, _ in rows):
                raise InvalidComponentSpec("load table needs rows with kW >= 0")
            object.__setattr__(self, "table", rows)

    @property
    def n_hours(self) -> Optional[int]:
        return None if self.hourly_kw is None else int(self.hourly_kw.size)


def load_histogram(series: np.ndarray, n_states: int) -> tuple[np.ndarray, np.ndarray]:
    """Interval midpoints and counts; the last interval is closed on the right."""
    counts, edges = np.histogram(series, bins=n_states, range=(float(series.min()), float(series.max())))
    return (edges[:-1] + edges[1:]) / 2.0, counts


def load_ufunction(spec: LoadSpec) -> UFunction:
    if spec.table is not None:
        kw, probs = zip(*spec.table)
        return from_arrays(kw, probs, mass_tolerance=spec.mass_tolerance)
    series = spec.hourly_kw
    if series.size == 0 or series.size < spec.n_states:
        raise DegenerateSeries(f"load series has {series.size} values for {spec.n_states} states")
    if series.max() == series.min():
        logger.warning("constant load series collapsed to one state", extra={"extra": {"kw": float(series[0])}})
        return degenerate(float(series[0]))
    mids, counts = load_histogram(series, spec.n_states)
    keep = counts > 0
    return from_arrays(mids[keep], counts[keep] / series.size)
