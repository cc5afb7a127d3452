"""Independent checks of the adequacy indices.

Both checks work on the joint state space directly: component states come
from the specs (tables, discretized densities, power curves, binomial unit
counts) and generation is summed per joint state. No u-function algebra is
involved, so a fault in composition or collection cannot hide here. Load
intervals and Markov steady states are computed here as well; only the
tie rule for load equal to generation is shared, through
:func:`ugfrel.ugf.loss_pairs`.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy import linalg, stats

from .components import default_wind_max, pv_module_power, wind_power
from .stochastic import DiscretizedDistribution, MarkovGenerator, Mechanics, TwoStateRates, discretize
from .system import ReliabilityReport, SystemConfig
from .ugf import ModelInputError, loss_pairs

logger = logging.getLogger("ugfrel.oracle")

DEFAULT_MAX_STATES = 100_000_000
# upper bound on array elements materialized per chunk
CHUNK_ELEMENTS = 4_000_000
DEFAULT_BATCH_SIZE = 200_000


class SpaceTooLarge(ModelInputError):
    pass


class JointState(NamedTuple):
    """Index of each factor in one joint state.

    Mechanical factors are counts of working units (modules, turbines or EVs);
    independent identical units enter only through that count.
    """

    irradiance: int
    solar_working: int
    wind: int
    wind_working: int
    ev_operation: int
    ev_working: int
    transformer: int
    load: int


class OracleResult(NamedTuple):
    loss_probability: float
    expected_unserved_kw: float
    total_probability: float
    n_states: int


class MonteCarloResult(NamedTuple):
    loss_probability: float
    loss_probability_ci: float
    eens_kwh: float
    eens_kwh_ci: float
    n_samples: int
    seed: int


class OracleCheck(NamedTuple):
    matches: bool
    loss_rel_error: float
    unserved_rel_error: float


@dataclass(frozen=True, eq=False)
class _Axis:
    values: np.ndarray
    probs: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)


_NONE = _Axis(np.array([0.0]), np.array([1.0]))


def _availability(mech: Mechanics) -> float:
    if isinstance(mech, TwoStateRates):
        return mech.repair_rate / (mech.failure_rate + mech.repair_rate)
    return float(mech.value)


def _stationary(markov: MarkovGenerator) -> np.ndarray:
    """Stationary distribution as the null vector of Q transposed."""
    basis = linalg.null_space(markov.rate_matrix.T)
    if basis.shape[1] != 1:
        raise ModelInputError(f"chain has {basis.shape[1]} stationary directions")
    pi = basis[:, 0] / basis[:, 0].sum()
    return np.clip(pi, 0.0, None)


def _binomial_axis(n: int, availability: float, per_unit: float = 1.0) -> _Axis:
    k = np.arange(n + 1)
    return _Axis(k * float(per_unit), stats.binom.pmf(k, n, availability))


def _block_axis(value: float, availability: float) -> _Axis:
    return _Axis(np.array([0.0, float(value)]), np.array([1.0 - availability, availability]))


def _table_axis(rows) -> _Axis:
    probs = np.array([r[1] for r in rows], dtype=np.float64)
    return _Axis(np.array([r[2] for r in rows], dtype=np.float64), probs / math.fsum(probs.tolist()))


def _solar_axes(config: SystemConfig) -> tuple[_Axis, _Axis]:
    spec = config.solar
    if spec is None or config.solar_count == 0:
        return _NONE, _NONE
    if spec.table is not None:
        source = _table_axis(spec.table.rows)
    else:
        if isinstance(spec.irradiance, DiscretizedDistribution):
            dist = spec.irradiance
        else:
            dist = discretize(spec.irradiance, spec.n_states, spec.max_value)
        source = _Axis(np.asarray(pv_module_power(dist.state_values, spec.panel)), dist.state_probs)
    a = _availability(spec.mech)
    if spec.granularity == "module":
        units = _binomial_axis(config.solar_count * spec.n_modules, a)
    else:
        units = _binomial_axis(config.solar_count, a, spec.n_modules)
    return source, units


def _wind_axes(config: SystemConfig) -> tuple[_Axis, _Axis]:
    spec = config.wind
    if spec is None or config.wind_count == 0:
        return _NONE, _NONE
    if spec.table is not None:
        source = _table_axis(spec.table.rows)
    else:
        if isinstance(spec.wind, DiscretizedDistribution):
            dist = spec.wind
        else:
            upper = spec.max_value if spec.max_value is not None else default_wind_max(spec)
            dist = discretize(spec.wind, spec.n_states, upper)
        source = _Axis(np.asarray(wind_power(dist.state_values, spec.curve)), dist.state_probs)
    return source, _binomial_axis(config.wind_count, _availability(spec.mech))


def _ev_axes(config: SystemConfig) -> tuple[_Axis, _Axis]:
    spec = config.ev
    if spec is None:
        return _NONE, _NONE
    hours = np.asarray(spec.residence_hours, dtype=np.float64)
    operation = _Axis(np.array([-spec.p_v, 0.0, spec.p_v]), hours / math.fsum(hours.tolist()))
    a = _availability(spec.mech)
    units = _binomial_axis(spec.n_ev, a) if spec.per_ev else _block_axis(spec.n_ev, a)
    return operation, units


def _transformer_axis(config: SystemConfig) -> _Axis:
    if config.transformer is None:
        return _NONE
    spec = config.transformer
    if spec.markov is not None:
        return _Axis(np.asarray(spec.capacity_fractions) * spec.rated_kw, _stationary(spec.markov))
    return _block_axis(spec.rated_kw, _availability(spec.mech))


def _load_axis(config: SystemConfig) -> _Axis:
    spec = config.load
    if spec.table is not None:
        kw = np.array([r[0] for r in spec.table])
        probs = np.array([r[1] for r in spec.table])
        return _Axis(kw, probs / math.fsum(probs.tolist()))
    series = spec.hourly_kw
    if series.max() == series.min():
        return _Axis(np.array([float(series[0])]), np.array([1.0]))
    # intervals are closed on the left, the last one on both sides
    edges = np.linspace(float(series.min()), float(series.max()), spec.n_states + 1)
    idx = np.minimum(np.searchsorted(edges, series, side="right") - 1, spec.n_states - 1)
    counts = np.bincount(idx, minlength=spec.n_states)
    return _Axis((edges[:-1] + edges[1:]) / 2.0, counts / series.size)


def _joint_space(config: SystemConfig) -> list[_Axis]:
    """Factors in :class:`JointState` field order."""
    return [*_solar_axes(config), *_wind_axes(config), *_ev_axes(config), _transformer_axis(config), _load_axis(config)]


def joint_space_size(config: SystemConfig) -> int:
    return math.prod(len(axis) for axis in _joint_space(config))


def _outer(source: _Axis, units: _Axis) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.multiply.outer(source.values, units.values).ravel(),
        np.multiply.outer(source.probs, units.probs).ravel(),
    )


def _check_size(axes: list[_Axis], max_states: int) -> int:
    size = math.prod(len(axis) for axis in axes)
    if size > max_states:
        raise SpaceTooLarge(f"joint space has {size} states (cap {max_states})")
    return size


def iter_joint_states(
    config: SystemConfig, *, max_states: int = DEFAULT_MAX_STATES
) -> Iterator[tuple[JointState, float, float, float]]:
    """Yield (state, probability, generation kW, load kW) for every joint state."""
    axes = _joint_space(config)
    _check_size(axes, max_states)
    for idx in itertools.product(*(range(len(axis)) for axis in axes)):
        state = JointState(*idx)
        prob = math.prod(float(axes[i].probs[j]) for i, j in enumerate(idx))
        generation = 0.0
        for src, units in ((0, 1), (2, 3), (4, 5)):
            generation += float(axes[src].values[idx[src]]) * float(axes[units].values[idx[units]])
        generation += float(axes[6].values[idx[6]])
        yield state, prob, generation, float(axes[7].values[idx[7]])


def enumerate_exact(
    config: SystemConfig,
    *,
    max_states: int = DEFAULT_MAX_STATES,
    workers: int = 1,
) -> OracleResult:
    """Loss probability and expected unserved kW summed over every joint state."""
    axes = _joint_space(config)
    size = _check_size(axes, max_states)
    g_solar, p_solar = _outer(axes[0], axes[1])
    g_wind, p_wind = _outer(axes[2], axes[3])
    g_ev, p_ev = _outer(axes[4], axes[5])
    transformer, load = axes[6], axes[7]
    g_rest = (g_wind[:, None, None] + g_ev[None, :, None] + transformer.values[None, None, :]).ravel()
    p_rest = (p_wind[:, None, None] * p_ev[None, :, None] * transformer.probs[None, None, :]).ravel()

    per_row = g_rest.size * len(load)
    rows_per_chunk = max(1, CHUNK_ELEMENTS // per_row)
    chunks = [slice(i, i + rows_per_chunk) for i in range(0, g_solar.size, rows_per_chunk)]
    strict = config.strict_loss

    def partial(rows: slice) -> tuple[float, float, float]:
        gen = g_solar[rows, None] + g_rest[None, :]
        prob = p_solar[rows, None] * p_rest[None, :]
        deficit, mask = loss_pairs(load.values[:, None, None], gen[None, :, :], strict)
        joint = load.probs[:, None, None] * prob[None, :, :]
        hit = joint[mask]
        return (
            math.fsum(hit.tolist()),
            math.fsum((hit * deficit[mask]).tolist()),
            math.fsum(joint.ravel().tolist()),
        )

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(partial, chunks))
    else:
        partials = [partial(rows) for rows in chunks]

    loss = math.fsum(p[0] for p in partials)
    unserved = math.fsum(p[1] for p in partials)
    total = math.fsum(p[2] for p in partials)
    if abs(total - 1.0) > 1e-9:
        logger.warning("joint probability does not sum to 1", extra={"extra": {"total": total}})
    logger.info(
        "exact enumeration complete",
        extra={"extra": {"states": size, "chunks": len(chunks), "loss_probability": loss}},
    )
    return OracleResult(min(1.0, loss), max(0.0, unserved), total, size)


def monte_carlo(
    config: SystemConfig,
    n_samples: int,
    seed: int,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> MonteCarloResult:
    """Sample joint states from the product distribution; 95% normal CIs."""
    if n_samples < 1:
        raise ModelInputError("n_samples must be >= 1")
    if batch_size < 1:
        raise ModelInputError("batch_size must be >= 1")
    axes = _joint_space(config)
    rng = np.random.default_rng(seed)
    strict = config.strict_loss
    losses = 0
    sums: list[float] = []
    squares: list[float] = []
    remaining = n_samples
    while remaining > 0:
        n = min(batch_size, remaining)
        draws = [axis.values[rng.choice(len(axis), size=n, p=axis.probs)] for axis in axes]
        gen = draws[0] * draws[1] + draws[2] * draws[3] + draws[4] * draws[5] + draws[6]
        deficit, lost = loss_pairs(draws[7], gen, strict)
        unserved = np.where(lost, deficit, 0.0)
        losses += int(np.count_nonzero(lost))
        sums.append(math.fsum(unserved.tolist()))
        squares.append(math.fsum((unserved * unserved).tolist()))
        remaining -= n

    z = float(stats.norm.ppf(0.975))
    p_hat = losses / n_samples
    p_ci = z * math.sqrt(p_hat * (1.0 - p_hat) / n_samples)
    mean = math.fsum(sums) / n_samples
    if n_samples > 1:
        var = max(0.0, (math.fsum(squares) - n_samples * mean * mean) / (n_samples - 1))
    else:
        var = 0.0
    horizon = config.horizon
    result = MonteCarloResult(
        loss_probability=p_hat,
        loss_probability_ci=p_ci,
        eens_kwh=horizon * mean,
        eens_kwh_ci=horizon * z * math.sqrt(var / n_samples),
        n_samples=n_samples,
        seed=seed,
    )
    logger.info("monte carlo complete", extra={"extra": result._asdict()})
    return result


def _rel_error(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def compare(report: ReliabilityReport, oracle: OracleResult, rel_tolerance: float = 1e-9) -> OracleCheck:
    loss_err = _rel_error(report.loss_probability, oracle.loss_probability)
    unserved_err = _rel_error(report.expected_unserved_kw, oracle.expected_unserved_kw)
    return OracleCheck(loss_err <= rel_tolerance and unserved_err <= rel_tolerance, loss_err, unserved_err)
