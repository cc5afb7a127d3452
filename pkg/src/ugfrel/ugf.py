"""Universal generating function (UGF) algebra.

A u-function ``sum_i p_i * z**g_i`` is stored as two parallel numpy arrays,
values sorted strictly ascending. Every operation returns a canonical
u-function: zero-probability terms dropped and like terms collected.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import signal

logger = logging.getLogger("ugfrel.ugf")

MASS_TOLERANCE = 1e-6
DEFAULT_REL_TOL = 1e-9
# FFT round-off below this is treated as an empty grid point
FFT_FLOOR = 1e-15
MAX_GRID_POINTS = 10_000_000
# load and generation this close (relative) are a tie
TIE_REL_TOL = 1e-9
# grid indices must stay well inside int64
MAX_GRID_INDEX = 2.0**62


class ModelInputError(ValueError):
    """Base class for every invalid model input."""


class EmptyInput(ModelInputError):
    pass


class NegativeProbability(ModelInputError):
    pass


class MassNotNormalized(ModelInputError):
    pass


class StepNotPositive(ModelInputError):
    pass


class Term(NamedTuple):
    value: float
    probability: float


class Shortfall(NamedTuple):
    loss_probability: float
    expected_unserved: float


@dataclass(frozen=True)
class StructureFunction:
    """Binary map phi(g1, g2) -> g, applied elementwise to numpy arrays."""

    name: str
    op: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
        return self.op(g1, g2)


PLUS = StructureFunction("plus", np.add)
TIMES = StructureFunction("times", np.multiply)
# series capacity: the weakest element limits throughput
MIN = StructureFunction("min", np.minimum)


@dataclass(frozen=True, eq=False)
class UFunction:
    """Sparse PMF over real performance levels.

    Construct through :func:`make_ufunction` or :func:`from_arrays`; the raw
    constructor only accepts already canonical arrays.
    """

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        probs = np.array(self.probabilities, dtype=np.float64)
        if values.ndim != 1 or values.shape != probs.shape:
            raise ModelInputError("values and probabilities must be 1-D arrays of equal length")
        if values.size == 0:
            raise EmptyInput("u-function has no terms")
        if not np.all(np.isfinite(values)):
            raise ModelInputError("u-function values must be finite")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise NegativeProbability("probabilities must be finite and >= 0")
        if values.size > 1 and np.any(np.diff(values) <= 0):
            raise ModelInputError("values must be strictly increasing")
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probs)

    def __len__(self) -> int:
        return int(self.values.size)

    def __iter__(self) -> Iterator[Term]:
        for v, p in zip(self.values.tolist(), self.probabilities.tolist()):
            yield Term(v, p)

    def __repr__(self) -> str:
        shown = " + ".join(f"{p:.4g}Z^{v:.6g}" for v, p in list(self)[:6])
        more = f" + ... ({len(self)} terms)" if len(self) > 6 else ""
        return f"UFunction({shown}{more})"

    @property
    def terms(self) -> list[Term]:
        return list(self)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.probabilities.tolist())

    @property
    def min_value(self) -> float:
        return float(self.values[0])

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    def mean(self) -> float:
        return math.fsum((self.values * self.probabilities).tolist())

    def scaled(self, factor: float, *, rel_tol: float = DEFAULT_REL_TOL) -> "UFunction":
        return _canonical(self.values * float(factor), self.probabilities, rel_tol)

    def to_pairs(self) -> list[list[float]]:
        return [[v, p] for v, p in zip(self.values.tolist(), self.probabilities.tolist())]

    def isclose(self, other: "UFunction", *, value_tol: float = 1e-9, prob_tol: float = 1e-12) -> bool:
        if len(self) != len(other):
            return False
        return bool(
            np.all(np.abs(self.values - other.values) <= value_tol)
            and np.all(np.abs(self.probabilities - other.probabilities) <= prob_tol)
        )


def collection_tolerance(values: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Default like-term tolerance: rel_tol * max(1, value span)."""
    if values.size == 0:
        return 0.0
    span = float(np.max(values) - np.min(values))
    return rel_tol * max(1.0, span)


def _collect(values: np.ndarray, probs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=np.float64)[order]
    p = np.asarray(probs, dtype=np.float64)[order]
    keep = p > 0
    v, p = v[keep], p[keep]
    if v.size == 0:
        raise EmptyInput("u-function has no probability mass")
    if v.size == 1:
        return v, p
    breaks = np.flatnonzero(np.diff(v) > tol) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.append(breaks - 1, v.size - 1)
    mass = np.add.reduceat(p, starts)
    lo, hi = v[starts], v[ends]
    weighted = np.add.reduceat(v * p, starts) / mass
    # exact duplicates keep their exact value; near-duplicates take the weighted mean
    merged = np.where(lo == hi, lo, np.clip(weighted, lo, hi))
    return merged, mass


def _canonical(values: np.ndarray, probs: np.ndarray, rel_tol: float) -> UFunction:
    values = np.asarray(values, dtype=np.float64)
    v, p = _collect(values, probs, collection_tolerance(values, rel_tol))
    return UFunction(v, p)


def from_arrays(
    values: Sequence[float] | np.ndarray,
    probabilities: Sequence[float] | np.ndarray,
    *,
    mass_tolerance: float = MASS_TOLERANCE,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probabilities, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("no terms given")
    if values.ndim != 1 or values.shape != probs.shape:
        raise ModelInputError("values and probabilities must be 1-D arrays of equal length")
    if not np.all(np.isfinite(values)):
        raise ModelInputError("values must be finite")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise NegativeProbability(f"negative or non-finite probability in {probs.tolist()}")
    mass = math.fsum(probs.tolist())
    if abs(mass - 1.0) > mass_tolerance:
        raise MassNotNormalized(f"probabilities sum to {mass!r}, not 1 (tolerance {mass_tolerance:g})")
    if abs(mass - 1.0) > MASS_TOLERANCE:
        logger.warning(
            "renormalizing printed probabilities",
            extra={"extra": {"mass": mass, "terms": int(values.size)}},
        )
    return _canonical(values, probs / mass, rel_tol)


def make_ufunction(
    pairs: Iterable[tuple[float, float]],
    *,
    mass_tolerance: float = MASS_TOLERANCE,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    """Build a canonical u-function from ``(value, probability)`` pairs.

    Mass within ``mass_tolerance`` of 1 is renormalized; anything further off
    raises :class:`MassNotNormalized`.
    """
    rows = [(float(v), float(p)) for v, p in pairs]
    if not rows:
        raise EmptyInput("no terms given")
    values, probs = zip(*rows)
    return from_arrays(values, probs, mass_tolerance=mass_tolerance, rel_tol=rel_tol)


def degenerate(value: float) -> UFunction:
    return UFunction(np.array([float(value)]), np.array([1.0]))


def collect_like_terms(u: UFunction, tol: float) -> UFunction:
    """Merge terms whose values are within ``tol`` of their neighbour."""
    if tol < 0:
        raise ModelInputError("tolerance must be >= 0")
    v, p = _collect(u.values, u.probabilities, tol)
    return UFunction(v, p)


def compose(
    u1: UFunction,
    u2: UFunction,
    phi: StructureFunction = PLUS,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    """Composition operator: all pairs (i, j) map to phi(g_i, g_j) with p_i * p_j."""
    values = np.asarray(phi(u1.values[:, None], u2.values[None, :]), dtype=np.float64).ravel()
    probs = np.multiply.outer(u1.probabilities, u2.probabilities).ravel()
    if values.size != probs.size:
        raise ModelInputError(f"structure function {phi.name!r} must be elementwise")
    if not np.all(np.isfinite(values)):
        raise ModelInputError(f"structure function {phi.name!r} produced non-finite values")
    out = _canonical(values, probs, rel_tol)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "composed u-functions",
            extra={"extra": {"phi": phi.name, "pairs": int(values.size), "terms": len(out)}},
        )
    return out


def compose_all(
    us: Sequence[UFunction],
    phi: StructureFunction = PLUS,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> UFunction:
    if not us:
        raise EmptyInput("nothing to compose")
    return reduce(lambda a, b: compose(a, b, phi, rel_tol=rel_tol), us)


def redundant_states(input_term_counts: Iterable[int], u: UFunction) -> int:
    """Number of states removed by like-term collection (the delta count)."""
    return math.prod(int(n) for n in input_term_counts) - len(u)


def psi_availability(u: UFunction, demand: float, strict: bool = False) -> float:
    """A(W): mass of terms with g >= W (or g > W when strict)."""
    mask = u.values > demand if strict else u.values >= demand
    return min(1.0, math.fsum(u.probabilities[mask].tolist()))


def loss_pairs(
    load: np.ndarray,
    generation: np.ndarray,
    strict: bool = True,
    *,
    rel_tol: float = TIE_REL_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Deficit ``load - generation`` (broadcast) and the mask of loss pairs.

    Differences within ``rel_tol * max(1, |L|, |G|)`` are ties and come back as
    a deficit of exactly 0, so the outcome does not depend on the order
    generation was summed in. Ties are loss only when ``strict`` is off.
    """
    deficit = load - generation
    tol = rel_tol * np.maximum(1.0, np.maximum(np.abs(load), np.abs(generation)))
    deficit = np.where(np.abs(deficit) <= tol, 0.0, deficit)
    mask = deficit > 0 if strict else deficit >= 0
    return deficit, mask


def shortfall(u_g: UFunction, u_l: UFunction, strict: bool = True) -> Shortfall:
    """Loss probability and expected unserved power over all (generation, load) pairs.

    ``strict`` counts a pair as loss only when load exceeds generation.
    """
    deficit, mask = loss_pairs(u_l.values[:, None], u_g.values[None, :], strict)
    joint = np.multiply.outer(u_l.probabilities, u_g.probabilities)
    loss = math.fsum(joint[mask].tolist())
    unserved = math.fsum((joint[mask] * deficit[mask]).tolist())
    return Shortfall(min(1.0, loss), max(0.0, unserved))


def quantize(u: UFunction, step: float, *, rel_tol: float = DEFAULT_REL_TOL) -> UFunction:
    """Move each term's mass to the nearest multiple of ``step`` (ties to even)."""
    if not step > 0:
        raise StepNotPositive(f"grid step must be > 0, got {step!r}")
    return _canonical(np.rint(u.values / step) * step, u.probabilities, rel_tol)


def gridded_compose_plus(
    u1: UFunction,
    u2: UFunction,
    step: float,
    *,
    method: str = "direct",
    max_grid_points: int = MAX_GRID_POINTS,
) -> UFunction:
    """PLUS composition on a uniform grid by array convolution.

    ``method`` is passed to :func:`scipy.signal.convolve` ("direct", "fft" or "auto").
    """
    if not step > 0:
        raise StepNotPositive(f"grid step must be > 0, got {step!r}")
    r1 = np.rint(u1.values / step)
    r2 = np.rint(u2.values / step)
    if max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))) >= MAX_GRID_INDEX:
        raise ModelInputError(f"values too large for a grid step of {step!r}")
    span = (r1[-1] - r1[0]) + (r2[-1] - r2[0]) + 1.0
    if span > max_grid_points:
        raise ModelInputError(f"grid of {span:.0f} points exceeds the limit of {max_grid_points}")
    k1 = r1.astype(np.int64)
    k2 = r2.astype(np.int64)
    dense1 = np.bincount(k1 - k1[0], weights=u1.probabilities)
    dense2 = np.bincount(k2 - k2[0], weights=u2.probabilities)
    out = signal.convolve(dense1, dense2, method=method)
    if method != "direct":
        out = np.clip(out, 0.0, None)
        out[out < FFT_FLOOR] = 0.0
    grid = (np.arange(out.size, dtype=np.int64) + k1[0] + k2[0]) * step
    keep = out > 0
    return UFunction(grid[keep], out[keep])
