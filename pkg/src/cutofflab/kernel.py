"""Continuous-time evaluation via uniformization, distance curves, mixing times.

The continuous-time kernel exp(-t(I - K)) is evaluated as the Poisson mixture
sum_m e^{-t} t^m / m! K^m, truncated on both sides so the neglected Poisson
mass stays below the requested tolerance.  For large t the summation starts
at the lower truncation point, reached by binary matrix powering, which keeps
the work proportional to the Poisson window (a few sqrt(t) terms) instead
of t.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .chains import MarkovChain, as_distribution, point_mass, power_distribution
from .distances import DistanceKind, distance

MAX = "max"  # start marker: maximize the distance over all point-mass starts


class BudgetExceededError(RuntimeError):
    """Uniformization would need more terms than the configured budget."""


class NoUpperBracketError(RuntimeError):
    """The distance stayed above epsilon past the doubling horizon."""


@dataclass(frozen=True)
class UniformizationParams:
    """Truncation control: neglected Poisson mass < tail_tol, index <= max_terms."""

    tail_tol: float = 1e-12
    max_terms: int = 10_000_000

    def __post_init__(self):
        if not 0.0 < self.tail_tol <= 1e-6:
            raise ValueError(f"tail_tol must be in (0, 1e-6], got {self.tail_tol!r}")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


DEFAULT_PARAMS = UniformizationParams()


def _poisson_window(t: float, params: UniformizationParams) -> tuple[int, np.ndarray]:
    """Two-sided Poisson(t) truncation: (m_lo, weights for m_lo..m_hi).

    The window keeps all but < tail_tol of the mass, split between the two
    tails.  Candidate range is 12 standard deviations plus a constant guard,
    whose own neglected mass is far below any admissible tail_tol.
    """
    if t <= 0.0:
        return 0, np.ones(1)
    sd = math.sqrt(t)
    lo = max(0, int(t - 12.0 * sd - 50.0))
    hi = int(t + 12.0 * sd + 50.0)
    if hi > params.max_terms:
        raise BudgetExceededError(
            f"uniformization at t = {t:.6g} needs terms up to {hi}, "
            f"budget is {params.max_terms}"
        )
    m = np.arange(lo, hi + 1)
    log_t = math.log(t)
    log_fact = np.array([math.lgamma(v + 1.0) for v in m], dtype=float)
    w = np.exp(-t + m * log_t - log_fact)
    half = 0.5 * params.tail_tol
    head = np.cumsum(w)
    n_head = int(np.searchsorted(head, half, side="right"))
    tail = np.cumsum(w[::-1])
    n_tail = int(np.searchsorted(tail, half, side="right"))
    if n_tail == 0:
        trimmed = w[n_head:]
    else:
        trimmed = w[n_head : len(w) - n_tail]
    if trimmed.size == 0:
        raise BudgetExceededError("empty Poisson window; tail_tol too large for this t")
    m_lo = lo + n_head
    if m_lo + trimmed.size - 1 > params.max_terms:
        raise BudgetExceededError(
            f"uniformization needs terms up to {m_lo + trimmed.size - 1}, "
            f"budget is {params.max_terms}"
        )
    return m_lo, trimmed


def heat_kernel_row(
    chain: MarkovChain, start, t: float, params: UniformizationParams = DEFAULT_PARAMS
) -> np.ndarray:
    """Row mu H_t of the continuous-time kernel, renormalized to sum 1."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    v = as_distribution(start)
    if v.size != chain.n_states:
        raise ValueError(f"start has {v.size} states, chain has {chain.n_states}")
    if t == 0.0:
        return v.copy()
    m_lo, weights = _poisson_window(t, params)
    k = chain.kernel
    if m_lo > 0:
        v = v @ np.linalg.matrix_power(k, m_lo)
    out = weights[0] * v
    for w in weights[1:]:
        v = v @ k
        out += w * v
    return out / out.sum()


def heat_kernel_matrix(
    chain: MarkovChain, t: float, params: UniformizationParams = DEFAULT_PARAMS
) -> np.ndarray:
    """All rows of H_t at once; each row renormalized to sum 1."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    n = chain.n_states
    if t == 0.0:
        return np.eye(n)
    m_lo, weights = _poisson_window(t, params)
    k = chain.kernel
    p = np.linalg.matrix_power(k, m_lo) if m_lo > 0 else np.eye(n)
    out = weights[0] * p
    for w in weights[1:]:
        p = p @ k
        out += w * p
    return out / out.sum(axis=1, keepdims=True)


def _rowwise_distance(kind: DistanceKind, rows: np.ndarray, pi: np.ndarray) -> np.ndarray:
    if kind is DistanceKind.TV:
        return 0.5 * np.abs(rows - pi).sum(axis=1)
    if kind is DistanceKind.HELLINGER:
        aff = np.minimum(1.0, np.sqrt(rows * pi).sum(axis=1))
        return np.sqrt(1.0 - aff)
    if kind is DistanceKind.L2:
        if np.any(pi <= 0):
            raise ValueError("zero stationary mass: L2 distance needs pi > 0")
        return np.sqrt(((rows / pi - 1.0) ** 2 * pi).sum(axis=1))
    raise ValueError(f"unknown distance kind {kind!r}")


def distance_at(
    chain: MarkovChain,
    kind: DistanceKind,
    start,
    t: float,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Distance of the chain to stationarity at time t from the given start."""
    if isinstance(start, str) and start == MAX:
        return max_distance_at(chain, kind, t, params)
    row = heat_kernel_row(chain, start, t, params)
    return distance(kind, row, chain.stationary)


def max_distance_at(
    chain: MarkovChain,
    kind: DistanceKind,
    t: float,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Maximum of distance_at over all point-mass starts (exhaustive over states)."""
    rows = heat_kernel_matrix(chain, t, params)
    return float(_rowwise_distance(kind, rows, chain.stationary).max())


@dataclass(frozen=True)
class MixingTime:
    value: float
    kind: DistanceKind
    epsilon: float
    resolution: float


def invert_monotone(
    fn, epsilon: float, rel_resolution: float = 1e-6, max_doublings: int = 60
) -> tuple[float, float]:
    """Smallest t with fn(t) <= epsilon for a non-increasing fn.

    Brackets by doubling from t = 1, then bisects to the requested relative
    resolution.  Plateaus exactly at epsilon resolve to the left endpoint.
    Returns (value, bracket width); value is the certified endpoint where
    fn(value) <= epsilon.
    """
    if fn(0.0) <= epsilon:
        return 0.0, 0.0
    t_lo, t_hi = 0.0, 1.0
    doublings = 0
    while fn(t_hi) > epsilon:
        t_lo = t_hi
        t_hi *= 2.0
        doublings += 1
        if doublings > max_doublings:
            raise NoUpperBracketError(
                f"distance stayed above {epsilon} out to t = {t_hi:.3g}"
            )
    while t_hi - t_lo > rel_resolution * t_hi:
        mid = 0.5 * (t_lo + t_hi)
        if fn(mid) <= epsilon:
            t_hi = mid
        else:
            t_lo = mid
    return t_hi, t_hi - t_lo


def _search_integer(fn, epsilon: float, max_doublings: int = 60) -> int:
    """Smallest integer m with fn(m) <= epsilon over a non-increasing sequence."""
    if fn(0) <= epsilon:
        return 0
    m = 1
    doublings = 0
    while fn(m) > epsilon:
        m *= 2
        doublings += 1
        if doublings > max_doublings:
            raise NoUpperBracketError(f"distance stayed above {epsilon} out to m = {m}")
    lo, hi = m // 2, m
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fn(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def mixing_time(
    chain: MarkovChain,
    kind: DistanceKind,
    epsilon: float,
    start=MAX,
    mode: str = "continuous",
    params: UniformizationParams = DEFAULT_PARAMS,
    rel_resolution: float = 1e-6,
    max_doublings: int = 60,
) -> MixingTime:
    """First time the distance to stationarity drops to epsilon.

    ``start`` is a distribution or the MAX marker.  Continuous mode returns a
    real time at the given relative resolution; discrete mode the exact
    smallest integer number of steps.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon!r}")
    use_max = isinstance(start, str) and start == MAX
    if mode == "continuous":
        if use_max:
            fn = lambda t: max_distance_at(chain, kind, t, params)
        else:
            mu = as_distribution(start)
            fn = lambda t: distance_at(chain, kind, mu, t, params)
        value, resolution = invert_monotone(fn, epsilon, rel_resolution, max_doublings)
        return MixingTime(value=value, kind=kind, epsilon=epsilon, resolution=resolution)
    if mode == "discrete":
        pi = chain.stationary
        if use_max:
            def fn_m(m: int) -> float:
                rows = np.linalg.matrix_power(chain.kernel, m)
                return float(_rowwise_distance(kind, rows, pi).max())
        else:
            mu = as_distribution(start)

            def fn_m(m: int) -> float:
                return distance(kind, power_distribution(mu, chain.kernel, m), pi)

        value = _search_integer(fn_m, epsilon, max_doublings)
        return MixingTime(value=value, kind=kind, epsilon=epsilon, resolution=1.0)
    raise ValueError(f"mode must be 'continuous' or 'discrete', got {mode!r}")


def lazify(chain: MarkovChain, theta: float) -> MarkovChain:
    """Lazy version theta*I + (1-theta)*K; stationary and reversibility kept."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta!r}")
    n = chain.n_states
    kernel = theta * np.eye(n) + (1.0 - theta) * chain.kernel
    label = f"{chain.label}-lazy{theta:g}" if chain.label else f"lazy{theta:g}"
    return MarkovChain(
        kernel=kernel,
        stationary=chain.stationary,
        reversible=chain.reversible,
        label=label,
    )


MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class DistanceCurve:
    """Distance values on an ascending time grid; non-increasing within slack."""

    times: np.ndarray
    values: np.ndarray
    kind: DistanceKind
    start_label: str

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be matching vectors")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly ascending")
        rises = np.diff(self.values)
        if rises.size and float(rises.max()) > MONOTONE_SLACK:
            raise ValueError(f"curve rises by {rises.max():.3g}, beyond slack")


def distance_curve(
    chain: MarkovChain,
    kind: DistanceKind,
    start,
    times,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> DistanceCurve:
    """Evaluate the distance on a time grid and package it as a curve."""
    ts = np.asarray(times, dtype=float)
    if isinstance(start, str) and start == MAX:
        label = MAX
        values = np.array([max_distance_at(chain, kind, t, params) for t in ts])
    else:
        mu = as_distribution(start)
        support = np.flatnonzero(mu)
        label = f"state{support[0]}" if support.size == 1 and mu[support[0]] == 1.0 else "custom"
        values = np.array([distance_at(chain, kind, mu, t, params) for t in ts])
    return DistanceCurve(times=ts, values=values, kind=kind, start_label=label)


def format_float(x: float) -> str:
    """Deterministic 17-significant-digit rendering; infinities as inf/-inf."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_curve_csv(curve: DistanceCurve, fh) -> None:
    """Curve CSV with header t,value,kind,start, ordered by t (chain-time units)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "value", "kind", "start"])
    for t, v in zip(curve.times, curve.values):
        writer.writerow([format_float(t), format_float(v), curve.kind.value, curve.start_label])
