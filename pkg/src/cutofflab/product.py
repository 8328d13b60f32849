"""Product chains: dense oracle, tensor-factorized evaluation, product bounds.

A product chain updates coordinate i at rate p_i / q, so its continuous-time
kernel factorizes as the tensor product of the coordinate kernels run at the
scaled times p_i t / q.  The Hellinger distance of the product is then an
exact function of the coordinate Hellinger distances, while total variation
only admits two-sided bounds.  Weights are accepted unnormalized; every
formula uses p_i / q internally.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .chains import MarkovChain, as_distribution, chain_from_dict, load_chain, point_mass
from .distances import DistanceKind
from .kernel import (
    DEFAULT_PARAMS,
    MAX,
    MixingTime,
    UniformizationParams,
    distance_at,
    heat_kernel_row,
    invert_monotone,
    max_distance_at,
    mixing_time,
)

DENSE_STATE_LIMIT = 10_000


class TooLargeError(ValueError):
    """Product state space exceeds the dense-oracle guard."""


class TimeTooSmallError(ValueError):
    """Tail bounds require t at or past the coordinate mixing threshold."""


@dataclass(frozen=True, eq=False)
class ProductSpec:
    """Coordinate chains with positive weights; q is the weight total."""

    coords: tuple[MarkovChain, ...]
    weights: np.ndarray

    @property
    def q(self) -> float:
        return float(self.weights.sum())

    @property
    def n_coords(self) -> int:
        return len(self.coords)

    @property
    def n_states(self) -> int:
        out = 1
        for c in self.coords:
            out *= c.n_states
        return out


def product_spec(coords, weights) -> ProductSpec:
    coords = tuple(coords)
    if not coords:
        raise ValueError("product needs at least one coordinate")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(coords),):
        raise ValueError(f"{len(coords)} coordinates but weight shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("all weights must be positive")
    return ProductSpec(coords=coords, weights=w)


@dataclass(frozen=True)
class BoundBracket:
    lower: float
    upper: float
    kind: DistanceKind
    source: str

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError(f"bracket inverted: {self.lower} > {self.upper}")


def local_times(spec: ProductSpec, t: float) -> np.ndarray:
    """Coordinate times p_i t / q."""
    return spec.weights * (t / spec.q)


def _coordinate_start(start, chain: MarkovChain):
    if isinstance(start, (int, np.integer)):
        return point_mass(chain.n_states, int(start))
    return as_distribution(start)


def coordinate_distances(
    spec: ProductSpec,
    kind: DistanceKind,
    t: float,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> np.ndarray:
    """Per-coordinate distances at the scaled times p_i t / q.

    ``starts`` is MAX or one start per coordinate (distribution or state
    index).
    """
    times = local_times(spec, t)
    if isinstance(starts, str) and starts == MAX:
        return np.array(
            [max_distance_at(c, kind, s, params) for c, s in zip(spec.coords, times)]
        )
    if len(starts) != spec.n_coords:
        raise ValueError(f"{spec.n_coords} coordinates but {len(starts)} starts")
    return np.array(
        [
            distance_at(c, kind, _coordinate_start(mu, c), s, params)
            for c, mu, s in zip(spec.coords, starts, times)
        ]
    )


def product_hellinger_exact(
    spec: ProductSpec, t: float, starts=MAX, params: UniformizationParams = DEFAULT_PARAMS
) -> float:
    """Exact product Hellinger distance sqrt(1 - prod(1 - d_i^2)).

    The affinity of a product measure is the product of coordinate
    affinities, so this is an identity, not a bound.  For MAX the per-factor
    maxima are taken coordinatewise: 1 - prod(1 - x_i) is nondecreasing in
    every x_i and point masses on the product space factorize into point
    masses per coordinate, hence the sup over product starts is attained by
    maximizing each factor separately.
    """
    d = coordinate_distances(spec, DistanceKind.HELLINGER, t, starts, params)
    return math.sqrt(max(0.0, 1.0 - float(np.prod(1.0 - d**2))))


def product_tv_bracket(
    spec: ProductSpec, t: float, starts=MAX, params: UniformizationParams = DEFAULT_PARAMS
) -> BoundBracket:
    """Two-sided bound on the product TV from coordinate TV distances."""
    d = coordinate_distances(spec, DistanceKind.TV, t, starts, params)
    lower = max(1.0 - float(np.prod(np.sqrt(1.0 - d**2))), float(d.max()))
    upper = 1.0 - float(np.prod(1.0 - d))
    return BoundBracket(lower=lower, upper=upper, kind=DistanceKind.TV, source="coordinate-tv-product")


def product_tv_sandwich(
    spec: ProductSpec, t: float, starts=MAX, params: UniformizationParams = DEFAULT_PARAMS
) -> BoundBracket:
    """TV bracket derived from the exact product Hellinger distance.

    With h the exact product Hellinger value, h^2 <= d_TV <= h sqrt(2 - h^2).
    Much tighter than the coordinate bracket near cutoff, since h is exact.
    """
    h = product_hellinger_exact(spec, t, starts, params)
    lower = h * h
    upper = min(1.0, h * math.sqrt(max(0.0, 2.0 - h * h)))
    return BoundBracket(lower=lower, upper=upper, kind=DistanceKind.TV, source="hellinger-sandwich")


def _rho_distances(spec, kind, t, starts, params) -> tuple[np.ndarray, float]:
    if kind not in (DistanceKind.TV, DistanceKind.HELLINGER):
        raise ValueError(f"kind must be TV or Hellinger, got {kind!r}")
    return coordinate_distances(spec, kind, t, starts, params), kind.rho


def prodmixing_lower_branches(
    spec: ProductSpec,
    t: float,
    kind: DistanceKind,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> tuple[float, float]:
    """Both lower-bound branches on the rho-power scale.

    Returns (1 - exp(-(rho/2) sum d_i^2), max_i d_i^rho); the effective lower
    bound is their maximum and which branch is active depends on the regime,
    so both are reported.
    """
    d, rho = _rho_distances(spec, kind, t, starts, params)
    exp_branch = 1.0 - math.exp(-0.5 * rho * float((d**2).sum()))
    max_branch = float((d**rho).max())
    return exp_branch, max_branch


def prodmixing_bounds(
    spec: ProductSpec,
    t: float,
    kind: DistanceKind,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> BoundBracket:
    """Exponential-sum bracket for the product distance on the rho-power scale.

    Bounds d_TV itself for TV and the squared distance for Hellinger:
    upper = 1 - exp(-sum d_i^rho / (1 - d_i^rho)), lower the best of the two
    branches from prodmixing_lower_branches.
    """
    d, rho = _rho_distances(spec, kind, t, starts, params)
    drho = d**rho
    if np.any(drho >= 1.0):
        upper = 1.0
    else:
        upper = 1.0 - math.exp(-float((drho / (1.0 - drho)).sum()))
    lower = min(max(prodmixing_lower_branches(spec, t, kind, starts, params)), upper)
    return BoundBracket(lower=lower, upper=upper, kind=kind, source="exponential-sum")


_mixing_cache: dict[tuple, MixingTime] = {}


def cached_max_mixing_time(
    chain: MarkovChain,
    kind: DistanceKind,
    epsilon: float,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> MixingTime:
    """Continuous max-start mixing time, cached per (chain, kind, epsilon).

    Values are deterministic, so concurrent insertion of the same key is
    harmless (last writer wins with an identical value).
    """
    key = (chain, kind, float(epsilon), params)
    hit = _mixing_cache.get(key)
    if hit is None:
        hit = mixing_time(chain, kind, epsilon, start=MAX, mode="continuous", params=params)
        _mixing_cache[key] = hit
    return hit


def prodmixing_upper_simple(
    spec: ProductSpec,
    t: float,
    kind: DistanceKind,
    a_level: float,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Simplified upper bound 1 - exp(-c_A sum d_i^rho) with c_A = 1/(1-A).

    Valid once every coordinate has mixed to A^(1/rho), i.e. for
    t >= max_i T_i(A^(1/rho)) q / p_i; earlier times raise TimeTooSmallError.
    """
    if not 0.0 < a_level < 1.0:
        raise ValueError(f"A must be in (0, 1), got {a_level!r}")
    d, rho = _rho_distances(spec, kind, t, starts, params)
    level = a_level ** (1.0 / rho)
    threshold = max(
        cached_max_mixing_time(c, kind, level, params).value * spec.q / p
        for c, p in zip(spec.coords, spec.weights)
    )
    if t < threshold:
        raise TimeTooSmallError(f"t = {t:.6g} below coordinate threshold {threshold:.6g}")
    c_a = 1.0 / (1.0 - a_level)
    return 1.0 - math.exp(-c_a * float((d**rho).sum()))


def sum_bound(
    spec: ProductSpec,
    t: float,
    kind: DistanceKind,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Additive upper bound: sum d_i^2 for Hellinger squared, sum d_i for TV."""
    d, rho = _rho_distances(spec, kind, t, starts, params)
    return float((d**rho).sum())


def _tail_eps_u(spec, t, eps, u, kind, eps_cap, params):
    e = np.broadcast_to(np.asarray(eps, dtype=float), (spec.n_coords,)).copy()
    if np.any(e <= 0) or np.any(e >= eps_cap):
        raise ValueError(f"epsilons must lie in (0, {eps_cap:g})")
    if u is None:
        u_arr = np.array(
            [
                cached_max_mixing_time(c, kind, float(ei), params).value
                for c, ei in zip(spec.coords, e)
            ]
        )
    else:
        u_arr = np.broadcast_to(np.asarray(u, dtype=float), (spec.n_coords,)).copy()
        if np.any(u_arr <= 0):
            raise ValueError("mixing upper bounds u must be positive")
    threshold = float((u_arr * spec.q / spec.weights).max())
    if t < threshold * (1.0 - 1e-12):
        raise TimeTooSmallError(f"t = {t:.6g} below threshold {threshold:.6g}")
    return e, u_arr


def tail_bound_tv(
    spec: ProductSpec,
    t: float,
    eps,
    u=None,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Submultiplicativity tail bound on the product max TV.

    With u_i >= T_i,TV(eps_i) (computed on demand when omitted) and
    t >= max u_i q / p_i, the product TV is at most
    1 - exp(-sum (2 eps_i)^floor(p_i t / (u_i q))).
    """
    e, u_arr = _tail_eps_u(spec, t, eps, u, DistanceKind.TV, 0.5, params)
    exponents = np.floor(spec.weights * t / (u_arr * spec.q) + 1e-12)
    return 1.0 - math.exp(-float(((2.0 * e) ** exponents).sum()))


def tail_bound_hellinger(
    spec: ProductSpec,
    t: float,
    eps,
    u=None,
    params: UniformizationParams = DEFAULT_PARAMS,
) -> float:
    """Tail bound on the product max Hellinger distance (not squared).

    Requires eps_i in (0, 1/sqrt(2)) and u_i >= T_i,H(eps_i); the square of
    the returned value is 1 - exp(-(1/8) sum (4 eps_i)^(2 floor(p_i t/(u_i q)))).
    """
    e, u_arr = _tail_eps_u(spec, t, eps, u, DistanceKind.HELLINGER, 1.0 / math.sqrt(2.0), params)
    exponents = np.floor(spec.weights * t / (u_arr * spec.q) + 1e-12)
    total = float(((4.0 * e) ** (2.0 * exponents)).sum())
    return math.sqrt(1.0 - math.exp(-total / 8.0))


def dense_product_chain(spec: ProductSpec) -> MarkovChain:
    """Exact dense product kernel on the lexicographic product space (oracle).

    K = sum_i (p_i / q) I x ... x K_i x ... x I with the product stationary
    distribution; guarded by the dense state limit.
    """
    n = spec.n_states
    if n > DENSE_STATE_LIMIT:
        raise TooLargeError(f"product has {n} states, dense oracle limit is {DENSE_STATE_LIMIT}")
    sizes = [c.n_states for c in spec.coords]
    kernel = np.zeros((n, n))
    for i, coord in enumerate(spec.coords):
        factors = [np.eye(m) for m in sizes]
        factors[i] = coord.kernel
        kernel += (spec.weights[i] / spec.q) * reduce(np.kron, factors)
    stationary = reduce(np.kron, [c.stationary for c in spec.coords])
    label = "x".join(c.label or f"coord{i}" for i, c in enumerate(spec.coords))
    return MarkovChain(
        kernel=kernel,
        stationary=stationary,
        reversible=all(c.reversible for c in spec.coords),
        label=label,
    )


def dense_product_start(spec: ProductSpec, starts) -> np.ndarray:
    """Tensor product of per-coordinate starts, for use with the dense oracle."""
    vecs = [_coordinate_start(mu, c) for mu, c in zip(starts, spec.coords)]
    return reduce(np.kron, vecs)


def product_mixing_time_bracket(
    spec: ProductSpec,
    kind: DistanceKind,
    epsilon: float,
    starts=MAX,
    params: UniformizationParams = DEFAULT_PARAMS,
    rel_resolution: float = 1e-6,
) -> tuple[float, float]:
    """Bracket [t_lo, t_hi] containing the product mixing time at epsilon.

    Hellinger uses the exact factorized curve, so the bracket collapses to
    the root-finding resolution.  TV inverts the hellinger-sandwich envelope:
    the true mixing time is at least the crossing of the lower envelope and
    at most the crossing of the upper one.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon!r}")
    if kind is DistanceKind.HELLINGER:
        value, _ = invert_monotone(
            lambda t: product_hellinger_exact(spec, t, starts, params), epsilon, rel_resolution
        )
        return value, value
    if kind is DistanceKind.TV:
        def upper(t):
            h = product_hellinger_exact(spec, t, starts, params)
            return h * math.sqrt(max(0.0, 2.0 - h * h))

        def lower(t):
            h = product_hellinger_exact(spec, t, starts, params)
            return h * h

        t_lo, _ = invert_monotone(lower, epsilon, rel_resolution)
        t_hi, _ = invert_monotone(upper, epsilon, rel_resolution)
        return t_lo, t_hi
    raise ValueError(f"kind must be TV or Hellinger, got {kind!r}")


def product_spec_from_dict(data: dict, base_dir: str = ".") -> ProductSpec:
    """Build a ProductSpec from the JSON format {coords: [...], weights: [...]}.

    Coordinate entries are either inline chain objects or paths to chain
    files, resolved relative to ``base_dir``.
    """
    if "coords" not in data or "weights" not in data:
        raise ValueError("product file needs 'coords' and 'weights' fields")
    coords = []
    for entry in data["coords"]:
        if isinstance(entry, str):
            coords.append(load_chain(os.path.join(base_dir, entry)))
        elif isinstance(entry, dict):
            coords.append(chain_from_dict(entry))
        else:
            raise ValueError(f"coordinate entry must be a path or chain object, got {type(entry)}")
    return product_spec(coords, data["weights"])


def load_product_spec(path) -> ProductSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return product_spec_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
