"""Source distributions, equal-width discretization and Markov steady states."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, linalg, stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .ugf import ModelInputError

logger = logging.getLogger("ugfrel.stochastic")

HOURS_PER_YEAR = 8760.0
QUAD_EPSABS = 1e-10
RESIDUAL_TOLERANCE = 1e-10
# captured-mass loss above this is worth a warning
TAIL_WARN = 1e-3


class InvalidDensityParams(ModelInputError):
    pass


class MeanOutOfRange(ModelInputError):
    pass


class VarianceTooLarge(ModelInputError):
    pass


class BothRatesZero(ModelInputError):
    pass


class SingularOrReducible(ModelInputError):
    pass


class TimeUnit(str, enum.Enum):
    HOUR = "hour"
    YEAR = "year"

    @property
    def hours(self) -> float:
        return 1.0 if self is TimeUnit.HOUR else HOURS_PER_YEAR


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise InvalidDensityParams("Beta shapes must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidDensityParams(f"Beta shapes must be >= 0, got alpha={self.alpha}, beta={self.beta}")

    def frozen(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise InvalidDensityParams("a proper Beta density needs alpha > 0 and beta > 0")
        return stats.beta(self.alpha, self.beta)


@dataclass(frozen=True)
class WeibullParams:
    k: float
    c: float

    def __post_init__(self) -> None:
        if not (self.k > 0 and self.c > 0 and math.isfinite(self.k) and math.isfinite(self.c)):
            raise InvalidDensityParams(f"Weibull needs k > 0 and c > 0, got k={self.k}, c={self.c}")

    @property
    def is_rayleigh(self) -> bool:
        return self.k == 2

    def frozen(self):
        return stats.weibull_min(self.k, scale=self.c)


Density = Union[BetaParams, WeibullParams]


@dataclass(frozen=True, eq=False)
class DiscretizedDistribution:
    """Discrete source states: values, probabilities and the grid they came from.

    ``step`` and ``max_value`` are None for tabulated distributions whose grid
    is not known.
    """

    state_values: np.ndarray
    state_probs: np.ndarray
    step: Optional[float] = None
    max_value: Optional[float] = None

    def __post_init__(self) -> None:
        values = np.array(self.state_values, dtype=np.float64)
        probs = np.array(self.state_probs, dtype=np.float64)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise InvalidDensityParams("state values and probabilities must be non-empty and of equal length")
        if np.any(probs < 0):
            raise InvalidDensityParams("state probabilities must be >= 0")
        if abs(math.fsum(probs.tolist()) - 1.0) > 1e-9:
            raise InvalidDensityParams("state probabilities must sum to 1")
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "state_values", values)
        object.__setattr__(self, "state_probs", probs)

    @property
    def n_states(self) -> int:
        return int(self.state_values.size)


@dataclass(frozen=True)
class TwoStateRates:
    failure_rate: float
    repair_rate: float
    per: TimeUnit = TimeUnit.HOUR

    def __post_init__(self) -> None:
        object.__setattr__(self, "per", TimeUnit(self.per))
        for name in ("failure_rate", "repair_rate"):
            rate = getattr(self, name)
            if not math.isfinite(rate) or rate < 0:
                raise ModelInputError(f"{name} must be finite and >= 0, got {rate!r}")
        if self.failure_rate == 0 and self.repair_rate == 0:
            raise BothRatesZero("failure and repair rates are both zero")

    def per_hour(self) -> "TwoStateRates":
        h = self.per.hours
        return TwoStateRates(self.failure_rate / h, self.repair_rate / h, TimeUnit.HOUR)

    @property
    def availability(self) -> float:
        return steady_state_two_state(self)[0]


@dataclass(frozen=True)
class FixedAvailability:
    """A steady-state availability taken as given (e.g. a printed, rounded value)."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ModelInputError(f"availability must be in [0, 1], got {self.value!r}")

    @property
    def availability(self) -> float:
        return float(self.value)


Mechanics = Union[TwoStateRates, FixedAvailability]


@dataclass(frozen=True, eq=False)
class MarkovGenerator:
    rate_matrix: np.ndarray
    per: TimeUnit = TimeUnit.HOUR

    def __post_init__(self) -> None:
        q = np.array(self.rate_matrix, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise ModelInputError("rate matrix must be square and non-empty")
        if not np.all(np.isfinite(q)):
            raise ModelInputError("rate matrix must be finite")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise ModelInputError("off-diagonal rates must be >= 0")
        scale = max(1.0, float(np.max(np.abs(q))))
        if np.any(np.abs(q.sum(axis=1)) > 1e-9 * scale):
            raise ModelInputError("rate matrix rows must sum to 0")
        q.setflags(write=False)
        object.__setattr__(self, "rate_matrix", q)
        object.__setattr__(self, "per", TimeUnit(self.per))

    @property
    def n_states(self) -> int:
        return int(self.rate_matrix.shape[0])

    @classmethod
    def from_rates(cls, off_diagonal, per: TimeUnit | str = TimeUnit.HOUR) -> "MarkovGenerator":
        """Build a generator from transition rates; the diagonal is ignored and recomputed."""
        try:
            q = np.array(off_diagonal, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ModelInputError(f"rate matrix is not a numeric 2-D array: {exc}") from exc
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ModelInputError("rate matrix must be square")
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        return cls(q, TimeUnit(per))

    @classmethod
    def two_state(cls, rates: TwoStateRates) -> "MarkovGenerator":
        # state 0 working, state 1 failed
        lam, mu = rates.failure_rate, rates.repair_rate
        return cls(np.array([[-lam, lam], [mu, -mu]]), rates.per)

    def per_hour(self) -> "MarkovGenerator":
        return MarkovGenerator(self.rate_matrix / self.per.hours, TimeUnit.HOUR)


def fit_beta_moments(mean: float, variance: float) -> BetaParams:
    """Method-of-moments Beta fit from the mean and variance of normalized irradiance."""
    if not 0.0 < mean < 1.0:
        raise MeanOutOfRange(f"mean must be in (0, 1), got {mean!r}")
    if not variance > 0:
        raise InvalidDensityParams(f"variance must be > 0, got {variance!r}")
    if variance >= mean * (1.0 - mean):
        raise VarianceTooLarge(f"variance {variance!r} must be < mean*(1-mean) = {mean * (1.0 - mean)!r}")
    common = mean * (1.0 - mean) / variance - 1.0
    return BetaParams(mean * common, (1.0 - mean) * common)


def beta_moments(params: BetaParams) -> tuple[float, float]:
    a, b = params.alpha, params.beta
    s = a + b
    return a / s, a * b / (s * s * (s + 1.0))


def weibull_mean(params: WeibullParams) -> float:
    return params.c * math.gamma(1.0 + 1.0 / params.k)


def default_max_value(density: Density) -> float:
    if isinstance(density, BetaParams):
        return 1.0
    return 4.0 * density.c


def discretize(
    density: Density,
    n_states: int,
    max_value: Optional[float] = None,
    *,
    method: str = "cdf",
) -> DiscretizedDistribution:
    """Split [0, max_value] into ``n_states`` equal intervals.

    State i carries the density's mass over its interval (renormalized by the
    mass captured on [0, max_value]) and sits at the interval midpoint.
    ``method`` is "cdf" (closed-form CDF differences) or "quad" (adaptive
    quadrature of the density).
    """
    if n_states < 1:
        raise InvalidDensityParams(f"n_states must be >= 1, got {n_states!r}")
    upper = default_max_value(density) if max_value is None else float(max_value)
    if not upper > 0 or not math.isfinite(upper):
        raise InvalidDensityParams(f"max_value must be > 0, got {max_value!r}")
    dist = density.frozen()
    step = upper / n_states
    edges = np.linspace(0.0, upper, n_states + 1)
    if method == "cdf":
        mass = np.diff(dist.cdf(edges))
    elif method == "quad":
        mass = np.array(
            [integrate.quad(dist.pdf, lo, hi, epsabs=QUAD_EPSABS, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:])]
        )
    else:
        raise ValueError(f"unknown discretization method {method!r}")
    mass = np.clip(mass, 0.0, None)
    captured = math.fsum(mass.tolist())
    if not captured > 0:
        raise InvalidDensityParams(f"density has no mass on [0, {upper}]")
    if 1.0 - captured > TAIL_WARN:
        logger.warning(
            "discretization truncates tail mass",
            extra={"extra": {"captured": captured, "max_value": upper}},
        )
    values = (2.0 * np.arange(1, n_states + 1) - 1.0) * step / 2.0
    return DiscretizedDistribution(values, mass / captured, step, upper)


def steady_state_two_state(rates: TwoStateRates) -> tuple[float, float]:
    """(p_work, p_fail) of a two-state repairable unit."""
    total = rates.failure_rate + rates.repair_rate
    if total <= 0:
        raise BothRatesZero("failure and repair rates are both zero")
    p_fail = rates.failure_rate / total
    return 1.0 - p_fail, p_fail


def steady_state_general(m: MarkovGenerator) -> np.ndarray:
    """Stationary distribution pi with pi Q = 0 and sum(pi) = 1."""
    q = m.per_hour().rate_matrix
    n = q.shape[0]
    if n == 1:
        return np.array([1.0])
    adjacency = csr_matrix(q - np.diag(np.diag(q)) > 0)
    n_components, _ = connected_components(adjacency, directed=True, connection="strong")
    if n_components != 1:
        raise SingularOrReducible(f"chain is reducible ({n_components} communicating classes)")
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = linalg.solve(a, b)
    except linalg.LinAlgError as exc:
        raise SingularOrReducible(f"balance equations are singular: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(q))))
    residual = float(np.max(np.abs(pi @ q)))
    if residual > RESIDUAL_TOLERANCE * scale or np.any(pi < -1e-12):
        raise SingularOrReducible(f"stationary solve failed (residual {residual:.3g})")
    pi = np.clip(pi, 0.0, None)
    return pi / math.fsum(pi.tolist())
