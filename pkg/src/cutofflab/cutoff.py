"""Finite-index cutoff diagnostics for families of chains and product chains.

Every criterion here renders an asymptotic statement at finite family index:
mixing-time ratios and windows, the F/G functionals for product families,
the double-limit partial sums S(n, m, c), and the log-mixing-time
decomposition D_n.  Limits are never decided; diagnostics carry a
three-valued verdict with explicit, configurable thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .chains import MarkovChain
from .distances import DistanceKind
from .kernel import (
    DEFAULT_PARAMS,
    MAX,
    UniformizationParams,
    distance_at,
    max_distance_at,
    mixing_time,
)
from .product import (
    ProductSpec,
    cached_max_mixing_time,
    coordinate_distances,
    product_hellinger_exact,
    product_mixing_time_bracket,
)

Member = "MarkovChain | ProductSpec"


def default_epsilon(kind: DistanceKind) -> float:
    """Defaults satisfying eps < 1/(2 rho) with margin: 1/4 for TV, 1/8 for Hellinger."""
    if kind is DistanceKind.TV:
        return 0.25
    if kind is DistanceKind.HELLINGER:
        return 0.125
    raise ValueError(f"no default epsilon for kind {kind!r}")


@dataclass(frozen=True)
class FamilySpec:
    """Indexed family n -> chain or product spec, with optional schedules.

    ``weights`` supplies p_n for sequence-of-products constructions and the
    D_n diagnostic; ``starts`` fixes initial distributions per index (MAX
    otherwise); ``epsilon_schedule`` feeds the S(n, m, c) partial sums.
    """

    generator: Callable[[int], Any]
    label: str = ""
    epsilon_schedule: Callable[[int], float] | None = None
    weights: Callable[[int], float] | None = None
    log_weights: Callable[[int], float] | None = None
    starts: Callable[[int], Any] | None = None

    def member(self, n: int):
        if n < 1:
            raise ValueError(f"family index must be >= 1, got {n}")
        return self.generator(n)

    def start_for(self, n: int):
        return self.starts(n) if self.starts is not None else MAX

    def log_weight(self, n: int) -> float:
        """log p_n; superexponentially small weights must supply log_weights
        directly, since p_n itself underflows double precision."""
        if self.log_weights is not None:
            return self.log_weights(n)
        if self.weights is None:
            raise ValueError("family carries no weight schedule")
        p = self.weights(n)
        if p <= 0.0:
            raise ValueError(
                f"weight p_{n} = {p!r} is nonpositive (underflow?); supply log_weights"
            )
        return math.log(p)

    @property
    def has_weights(self) -> bool:
        return self.weights is not None or self.log_weights is not None


@dataclass(frozen=True)
class MixingProfile:
    indices: tuple[int, ...]
    times: np.ndarray
    kind: DistanceKind
    epsilon: float
    resolutions: np.ndarray
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failures


def _member_mixing_time(
    member,
    kind: DistanceKind,
    epsilon: float,
    start,
    params: UniformizationParams,
) -> tuple[float, float]:
    """(value, resolution) for one family member; products go through brackets."""
    if isinstance(member, MarkovChain):
        mt = mixing_time(member, kind, epsilon, start=start, mode="continuous", params=params)
        return mt.value, mt.resolution
    if isinstance(member, ProductSpec):
        lo, hi = product_mixing_time_bracket(member, kind, epsilon, starts=start, params=params)
        return 0.5 * (lo + hi), 0.5 * (hi - lo)
    raise TypeError(f"family member must be MarkovChain or ProductSpec, got {type(member)}")


def mixing_profile(
    family: FamilySpec,
    kind: DistanceKind,
    epsilon: float,
    indices,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> MixingProfile:
    """Per-index mixing times; failures are recorded, not raised."""
    indices = tuple(int(n) for n in indices)
    times = np.full(len(indices), np.nan)
    resolutions = np.full(len(indices), np.nan)
    failures: dict[int, str] = {}
    for pos, n in enumerate(indices):
        try:
            value, res = _member_mixing_time(
                family.member(n), kind, epsilon, family.start_for(n), params
            )
            times[pos] = value
            resolutions[pos] = res
        except Exception as exc:  # per-index isolation; partial profiles flagged
            failures[n] = f"{type(exc).__name__}: {exc}"
    return MixingProfile(
        indices=indices,
        times=times,
        kind=kind,
        epsilon=epsilon,
        resolutions=resolutions,
        failures=failures,
    )


@dataclass(frozen=True)
class VerdictThresholds:
    """Knobs for the three-valued verdicts, applied to excesses e = ratio - 1.

    Branches over the last three indices, in order: already at 1 (final
    excess <= ``band``, non-increasing); flat and away from 1 (relative
    wiggle <= ``flat_tol`` with final excess >= ``away_floor``); trending to 1
    (strictly decreasing, shedding >= ``min_improvement`` of the excess and
    finishing <= ``trend_ceiling``); far from 1 regardless of trend (every
    excess >= ``far_floor``; infinities from a zero denominator count).
    Fewer than ``min_indices`` indices is always inconclusive.
    """

    band: float = 0.05
    min_improvement: float = 0.10
    trend_ceiling: float = 3.0
    flat_tol: float = 0.10
    away_floor: float = 0.25
    far_floor: float = 25.0
    min_indices: int = 4


VERDICT_CUTOFF = "consistent-with-cutoff"
VERDICT_NO_CUTOFF = "consistent-with-no-cutoff"
VERDICT_INCONCLUSIVE = "inconclusive"


def _verdict(excesses: np.ndarray, thresholds: VerdictThresholds) -> str:
    e = np.asarray(excesses, dtype=float)
    if e.size < thresholds.min_indices or np.any(np.isnan(e)):
        return VERDICT_INCONCLUSIVE
    last = e[-3:]
    finite = bool(np.all(np.isfinite(last)))
    if finite and np.all(np.diff(last) <= 1e-12) and last[-1] <= thresholds.band:
        return VERDICT_CUTOFF
    if (
        finite
        and abs(last[-1] - last[0]) <= thresholds.flat_tol * max(last[0], 1e-12)
        and last[-1] >= thresholds.away_floor
    ):
        return VERDICT_NO_CUTOFF
    if (
        finite
        and np.all(np.diff(last) < 0)
        and last[0] - last[-1] >= thresholds.min_improvement * last[0]
        and last[-1] <= thresholds.trend_ceiling
    ):
        return VERDICT_CUTOFF
    if np.all(last >= thresholds.far_floor):
        return VERDICT_NO_CUTOFF
    return VERDICT_INCONCLUSIVE


@dataclass(frozen=True)
class CutoffReport:
    indices: tuple[int, ...]
    ratios: np.ndarray
    windows: np.ndarray | None
    trend_summary: dict
    verdict: str
    thresholds: VerdictThresholds


def cutoff_ratio_diagnostic(
    family: FamilySpec,
    kind: DistanceKind,
    eps: float,
    delta: float,
    indices,
    thresholds: VerdictThresholds = VerdictThresholds(),
    params: UniformizationParams = DEFAULT_PARAMS,
) -> CutoffReport:
    """Mixing-time ratios T_n(min level)/T_n(max level) and a trend verdict.

    A trend of the ratios toward 1 is consistent with cutoff; ratios bounded
    away from 1 with a flat trend are consistent with no cutoff.
    """
    if not (0.0 < eps < 1.0 and 0.0 < delta < 1.0 and eps != delta):
        raise ValueError("need distinct eps, delta in (0, 1)")
    lo_level, hi_level = min(eps, delta), max(eps, delta)
    prof_lo = mixing_profile(family, kind, lo_level, indices, params)
    prof_hi = mixing_profile(family, kind, hi_level, indices, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = prof_lo.times / prof_hi.times
    excess = ratios - 1.0
    verdict = _verdict(excess, thresholds)
    summary = {
        "last_ratio": float(ratios[-1]) if ratios.size else math.nan,
        "last3_ratios": [float(r) for r in ratios[-3:]],
        "failures": {**prof_lo.failures, **prof_hi.failures},
    }
    return CutoffReport(
        indices=prof_lo.indices,
        ratios=ratios,
        windows=None,
        trend_summary=summary,
        verdict=verdict,
        thresholds=thresholds,
    )


def window_diagnostic(
    family: FamilySpec,
    kind: DistanceKind,
    eps: float,
    indices,
    b_reference: Callable[[int], float] | None = None,
    thresholds: VerdictThresholds = VerdictThresholds(),
    params: UniformizationParams = DEFAULT_PARAMS,
) -> CutoffReport:
    """Window |T_n(eps) - T_n(1 - eps)| per index and its growth against T_n(eps).

    ``b_reference`` supplies a candidate window scale b_n; the report then
    carries window / b_n and sqrt(T_n) / b_n for comparison.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must be in (0, 1/2), got {eps!r}")
    prof_lo = mixing_profile(family, kind, eps, indices, params)
    prof_hi = mixing_profile(family, kind, 1.0 - eps, indices, params)
    windows = np.abs(prof_lo.times - prof_hi.times)
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = windows / prof_lo.times
    verdict = _verdict(relative, thresholds)
    summary = {
        "window_over_T": [float(x) for x in relative],
        "failures": {**prof_lo.failures, **prof_hi.failures},
    }
    if b_reference is not None:
        b = np.array([b_reference(n) for n in prof_lo.indices], dtype=float)
        summary["window_over_b"] = [float(x) for x in windows / b]
        summary["sqrtT_over_b"] = [float(x) for x in np.sqrt(prof_lo.times) / b]
    return CutoffReport(
        indices=prof_lo.indices,
        ratios=relative,
        windows=windows,
        trend_summary=summary,
        verdict=verdict,
        thresholds=thresholds,
    )


def f_n_evaluator(
    product_family: FamilySpec,
    t: float,
    n: int,
    starts=None,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> tuple[float, float]:
    """The pair (F, G) controlling Hellinger cutoff of a product family.

    F = sum_i d_i^2 / (1 - max_i d_i^2) with coordinate Hellinger distances
    at times p_i t / q, saturating to the inf marker when the max hits 1;
    G = max_i d_i.
    """
    member = product_family.member(n)
    if not isinstance(member, ProductSpec):
        raise ValueError(f"family member {n} is not a product spec")
    if starts is None:
        starts = product_family.start_for(n)
    d = coordinate_distances(member, DistanceKind.HELLINGER, t, starts, params)
    g = float(d.max())
    total = float((d**2).sum())
    if g >= 1.0:
        return math.inf, g
    return total / (1.0 - g * g), g


@dataclass(frozen=True)
class RDiagnostic:
    """Partial sums S(n, m, c) of the double-limit criterion, plus s_n.

    The grid is indexed (n, m) over the supplied lists; no limit is claimed,
    the caller reads the trend.
    """

    grid: np.ndarray
    s_values: np.ndarray
    c: float
    kind: DistanceKind
    n_list: tuple[int, ...]
    m_list: tuple[int, ...]


def r_estimator(
    family: FamilySpec,
    kind: DistanceKind,
    c: float,
    n_list,
    m_list,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> RDiagnostic:
    """Evaluate S(n, m, c) = sum_{i<=n-m} (2 rho eps_i)^(c rho s_n p_i / T_i).

    Requires the family to carry weights; epsilon defaults per kind and must
    stay below 1/(2 rho).  Coordinate mixing times are max-start continuous
    values, cached across the grid.  All weight ratios are formed in log
    space, so superexponentially decaying schedules stay finite; s_n itself
    is reported as exp of the log value and may round to inf.
    """
    if not family.has_weights:
        raise ValueError("r_estimator needs a family with a weight schedule")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c!r}")
    rho = kind.rho
    n_list = tuple(int(n) for n in n_list)
    m_list = tuple(int(m) for m in m_list)
    n_max = max(n_list)
    eps = np.empty(n_max + 1)
    log_t_over_p = np.empty(n_max + 1)
    log_t = np.empty(n_max + 1)
    log_p = np.empty(n_max + 1)
    for i in range(1, n_max + 1):
        e = (
            family.epsilon_schedule(i)
            if family.epsilon_schedule is not None
            else default_epsilon(kind)
        )
        if not 0.0 < e < 1.0 / (2.0 * rho):
            raise ValueError(f"epsilon schedule value {e!r} outside (0, 1/(2 rho))")
        member = family.member(i)
        if not isinstance(member, MarkovChain):
            raise ValueError("r_estimator coordinates must be plain chains")
        eps[i] = e
        t_i = cached_max_mixing_time(member, kind, e, params).value
        if t_i <= 0:
            raise ValueError(f"coordinate {i} mixes instantly at its epsilon; s_n undefined")
        log_t[i] = math.log(t_i)
        log_p[i] = family.log_weight(i)
        log_t_over_p[i] = log_t[i] - log_p[i]
    grid = np.zeros((len(n_list), len(m_list)))
    s_values = np.zeros(len(n_list))
    for a, n in enumerate(n_list):
        log_s_n = float(log_t_over_p[1 : n + 1].max())
        with np.errstate(over="ignore"):
            s_values[a] = math.exp(log_s_n) if log_s_n < 709 else math.inf
        for b, m in enumerate(m_list):
            top = n - m
            if top < 1:
                grid[a, b] = 0.0
                continue
            i = np.arange(1, top + 1)
            # exponent_i = c rho s_n p_i / T_i = c rho exp(log s_n - log(T_i/p_i));
            # the argmax coordinate gives exactly c rho this way
            log_exponents = math.log(c * rho) + (log_s_n - log_t_over_p[i])
            bases = 2.0 * rho * eps[i]
            with np.errstate(over="ignore", under="ignore"):
                exponents = np.exp(log_exponents)
                grid[a, b] = float(np.exp(exponents * np.log(bases)).sum())
    return RDiagnostic(
        grid=grid, s_values=s_values, c=c, kind=kind, n_list=n_list, m_list=m_list
    )


@dataclass(frozen=True)
class DnDecomposition:
    indices: tuple[int, ...]
    d_values: np.ndarray
    increments: np.ndarray
    a_fit: np.ndarray | None
    b_fit: np.ndarray | None
    c_residuals: np.ndarray | None
    flags: dict


def dn_decomposition(
    family: FamilySpec,
    kind: DistanceKind,
    weights: Callable[[int], float] | None,
    indices,
    a_candidate: Callable[[int], float] | None = None,
    b_candidate: Callable[[int], float] | None = None,
    epsilon: float | None = None,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> DnDecomposition:
    """D_n = log(T_n(eps_n) / p_n), its increments, and residuals of a proposed split.

    The split D_n = A_n n + B_n + C_n is not identifiable from D_n alone, so
    candidates for A and B are caller-supplied and C is reported as the
    residual.  Flags record whether B and D are nondecreasing at the supplied
    indices and the largest |C|.  D_n = log T_n - log p_n is formed in log
    space so superexponentially small weights stay usable.
    """
    if weights is not None:
        log_w = lambda n: math.log(weights(n))
    elif family.has_weights:
        log_w = family.log_weight
    else:
        raise ValueError("dn_decomposition needs weights")
    indices = tuple(int(n) for n in indices)
    d_values = np.empty(len(indices))
    for pos, n in enumerate(indices):
        e = (
            epsilon
            if epsilon is not None
            else (
                family.epsilon_schedule(n)
                if family.epsilon_schedule is not None
                else default_epsilon(kind)
            )
        )
        value, _ = _member_mixing_time(family.member(n), kind, e, family.start_for(n), params)
        if value <= 0:
            raise ValueError(f"nonpositive mixing time at index {n}; log undefined")
        d_values[pos] = math.log(value) - log_w(n)
    increments = np.diff(d_values)
    a_fit = b_fit = c_res = None
    flags: dict = {"d_nondecreasing": bool(np.all(increments >= -1e-12))}
    if a_candidate is not None and b_candidate is not None:
        a_fit = np.array([a_candidate(n) for n in indices], dtype=float)
        b_fit = np.array([b_candidate(n) for n in indices], dtype=float)
        c_res = d_values - a_fit * np.array(indices) - b_fit
        flags["b_nondecreasing"] = bool(np.all(np.diff(b_fit) >= -1e-12))
        flags["c_max_abs"] = float(np.max(np.abs(c_res)))
        flags["a_positive_nondecreasing"] = bool(
            np.all(a_fit > 0) and np.all(np.diff(a_fit) >= -1e-12)
        )
    return DnDecomposition(
        indices=indices,
        d_values=d_values,
        increments=increments,
        a_fit=a_fit,
        b_fit=b_fit,
        c_residuals=c_res,
        flags=flags,
    )


def two_state_product_cutoff_predictor(
    alphas, betas, weights, n: int
) -> tuple[bool, float, float]:
    """Finite-index criterion surrogate and (t_n, b_n) for two-state products.

    Validates nondecreasing weights and nondegenerate rates, evaluates the
    growth surrogate max_{j<=n} log(1+j)/p_j (flag: still growing at n), and
    returns t_n = q_n max_j log(1+j) / (2 p_j (alpha_j + beta_j)) with
    b_n = sqrt(t_n q_n).
    """
    a = np.asarray(alphas, dtype=float)[:n]
    b = np.asarray(betas, dtype=float)[:n]
    p = np.asarray(weights, dtype=float)[:n]
    if a.size < n or b.size < n or p.size < n:
        raise ValueError(f"need at least {n} rates and weights")
    if np.any(np.minimum(a, b) <= 0):
        raise ValueError("degenerate rates: every alpha_n and beta_n must be positive")
    if np.any(np.diff(p) < -1e-12):
        raise ValueError("monotonicity violated: weights must be nondecreasing")
    j = np.arange(1, n + 1)
    surrogate = np.log1p(j) / p
    half = max(1, math.ceil(n / 2))
    growing = bool(surrogate[:n].max() > surrogate[:half].max() + 1e-12)
    q_n = float(p.sum())
    t_n = q_n * float((np.log1p(j) / (2.0 * p * (a + b))).max())
    b_n = math.sqrt(t_n * q_n)
    return growing, t_n, b_n


def discrete_profile_values(
    chain: MarkovChain,
    kind: DistanceKind,
    a: float,
    t: float,
    start=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> tuple[float, float]:
    """Discrete-time distance at both floor(a t) and ceil(a t).

    The discrete cutoff definition evaluates scaled times through floor and
    ceiling; at finite index both are reported rather than choosing one.
    """
    from .chains import power_distribution
    from .distances import distance as dist

    lo, hi = int(math.floor(a * t)), int(math.ceil(a * t))
    out = []
    for m in (lo, hi):
        if isinstance(start, str) and start == MAX:
            rows = np.linalg.matrix_power(chain.kernel, max(m, 0))
            from .kernel import _rowwise_distance

            out.append(float(_rowwise_distance(kind, rows, chain.stationary).max()))
        else:
            out.append(
                dist(kind, power_distribution(start, chain.kernel, max(m, 0)), chain.stationary)
            )
    return out[0], out[1]
