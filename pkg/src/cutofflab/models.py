"""Builders and closed forms for the example chains: two-state, cycle,
Ehrenfest urn, lazy path, the interleaved family with geometric weights, and
the shortcut birth-death chain with its bound envelopes and threshold
machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chains import MarkovChain, stationary_distribution
from .cutoff import FamilySpec
from .product import ProductSpec, product_spec


class InadmissibleParamsError(ValueError):
    """Requested parameters push some transition probability outside [0, 1]."""


# ---------------------------------------------------------------------------
# Two-state chain and its closed forms


@dataclass(frozen=True)
class TwoStateChain:
    """Two-state chain with closed-form distance evaluators from state 0.

    The continuous-time formulas follow from the single nontrivial eigenvalue
    1 - alpha - beta; discrete variants replace e^{-(alpha+beta)t} by
    (1 - alpha - beta)^m.
    """

    alpha: float
    beta: float
    chain: MarkovChain

    def _s(self, t: float) -> float:
        return math.exp(-(self.alpha + self.beta) * t)

    def mass_at_zero(self, t: float) -> float:
        """Entry (0, 0) of the continuous-time kernel."""
        ab = self.alpha + self.beta
        return self.beta / ab + (self.alpha / ab) * self._s(t)

    def tv_zero(self, t: float) -> float:
        ab = self.alpha + self.beta
        return (self.alpha / ab) * self._s(t)

    def _hellinger_sq(self, s: float) -> float:
        ab = self.alpha + self.beta
        up = max(0.0, 1.0 + (self.alpha / self.beta) * s)
        down = max(0.0, 1.0 - s)
        return 1.0 - (self.beta / ab) * math.sqrt(up) - (self.alpha / ab) * math.sqrt(down)

    def hellinger_sq_zero(self, t: float) -> float:
        return self._hellinger_sq(self._s(t))

    def l2_sq_zero(self, t: float) -> float:
        return (self.alpha / self.beta) * self._s(t) ** 2

    def hellinger_sq_bracket_zero(self, t: float) -> tuple[float, float]:
        """Pointwise bracket d2^2/(4(2+r)) <= dH^2 <= d2^2/(2+r), r = (a/b)e^{-(a+b)t}."""
        denom = 2.0 + (self.alpha / self.beta) * self._s(t)
        d2 = self.l2_sq_zero(t)
        return d2 / (4.0 * denom), d2 / denom

    def tv_zero_steps(self, m: int) -> float:
        ab = self.alpha + self.beta
        return abs((self.alpha / ab) * (1.0 - ab) ** m)

    def hellinger_sq_zero_steps(self, m: int) -> float:
        return self._hellinger_sq((1.0 - (self.alpha + self.beta)) ** m)


def two_state_chain(alpha: float, beta: float) -> TwoStateChain:
    """Two-state chain with flip probabilities alpha (0->1) and beta (1->0)."""
    if not (0.0 < alpha <= 1.0 and 0.0 < beta <= 1.0):
        raise ValueError(f"alpha, beta must lie in (0, 1], got {alpha!r}, {beta!r}")
    kernel = np.array([[1.0 - alpha, alpha], [beta, 1.0 - beta]])
    ab = alpha + beta
    pi = np.array([beta / ab, alpha / ab])
    chain = MarkovChain(
        kernel=kernel, stationary=pi, reversible=True, label=f"two-state({alpha:g},{beta:g})"
    )
    return TwoStateChain(alpha=alpha, beta=beta, chain=chain)


def ex2p_fn(n: int, c: float, form: str = "stable") -> float:
    """The window profile f_n(c) of the symmetric two-state product.

    Both algebraic forms are available; the default is the numerically
    stable one, e^{-c} over a product of square-root factors, which avoids
    the cancellation of the direct form for large n e^c.
    """
    ne_c = n * math.exp(c)
    if ne_c <= 1.0:
        raise ValueError(f"need n e^c > 1, got {ne_c!r}")
    if form == "direct":
        u = ne_c**-0.5
        return 0.5 * n * (2.0 - math.sqrt(1.0 + u) - math.sqrt(1.0 - u))
    if form == "stable":
        root = math.sqrt(1.0 - 1.0 / ne_c)
        return math.exp(-c) / ((2.0 + math.sqrt(2.0 + 2.0 * root)) * (1.0 + root))
    raise ValueError(f"form must be 'direct' or 'stable', got {form!r}")


# ---------------------------------------------------------------------------
# Cycle, Ehrenfest urn, lazy path


def cycle_chain(n: int) -> MarkovChain:
    """Symmetric nearest-neighbor walk on the cycle with n + 1 sites.

    Each of the two half-steps lands on a neighbor; on two sites they
    coincide, giving the flip chain.
    """
    if n < 1:
        raise ValueError(f"cycle needs n >= 1, got {n}")
    size = n + 1
    kernel = np.zeros((size, size))
    for x in range(size):
        kernel[x, (x + 1) % size] += 0.5
        kernel[x, (x - 1) % size] += 0.5
    pi = np.full(size, 1.0 / size)
    return MarkovChain(kernel=kernel, stationary=pi, reversible=True, label=f"cycle({n})")


def ehrenfest_chain(n: int) -> MarkovChain:
    """Ehrenfest urn on {0, ..., n} with binomial stationary distribution."""
    if n < 1:
        raise ValueError(f"ehrenfest needs n >= 1, got {n}")
    size = n + 1
    kernel = np.zeros((size, size))
    for j in range(n):
        kernel[j, j + 1] = (n - j) / n
        kernel[j + 1, j] = (j + 1) / n
    pi = np.array([math.comb(n, j) for j in range(size)], dtype=float)
    pi /= pi.sum()
    return MarkovChain(kernel=kernel, stationary=pi, reversible=True, label=f"ehrenfest({n})")


def lazy_path_chain(n: int) -> MarkovChain:
    """Half-lazy walk on the path {0, ..., n}, loops of 1/2 at both ends."""
    if n < 1:
        raise ValueError(f"lazy path needs n >= 1, got {n}")
    size = n + 1
    kernel = np.zeros((size, size))
    for j in range(n):
        kernel[j, j + 1] = 0.5
        kernel[j + 1, j] = 0.5
    kernel[0, 0] = 0.5
    kernel[n, n] = 0.5
    pi = np.full(size, 1.0 / size)
    return MarkovChain(kernel=kernel, stationary=pi, reversible=True, label=f"lazy-path({n})")


# ---------------------------------------------------------------------------
# Interleaved family: Ehrenfest on odd indices, lazy path on even ones


def interleaved_family(r: float) -> FamilySpec:
    """Family alternating Ehrenfest (odd index 2n-1) and lazy path (even 2n),
    with weights r^(n-1) on the odd members and 1 on the even ones."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must be in (0, 1), got {r!r}")

    def generator(k: int):
        half, odd = divmod(k + 1, 2)
        return ehrenfest_chain(half) if odd == 0 else lazy_path_chain(half)

    def weights(k: int) -> float:
        half, odd = divmod(k + 1, 2)
        return r ** (half - 1) if odd == 0 else 1.0

    return FamilySpec(generator=generator, label=f"interleaved({r:g})", weights=weights)


def interleaved_q1(r: float, n: int) -> float:
    """Partial sum of the odd-index weights, q_n^(1) = sum_{i<=n} r^(i-1)."""
    return float((1.0 - r**n) / (1.0 - r))


def interleaved_q2(n: int) -> float:
    """Partial sum of the even-index weights, q_n^(2) = n."""
    return float(n)


def interleaved_odd_product(r: float, n: int) -> ProductSpec:
    """Product of the first n odd-index (Ehrenfest) members with their weights."""
    coords = [ehrenfest_chain(i) for i in range(1, n + 1)]
    weights = [r ** (i - 1) for i in range(1, n + 1)]
    return product_spec(coords, weights)


def interleaved_odd_cutoff_time(r: float, n: int) -> float:
    """Predicted cutoff time of the odd-index product, q_n^(1) r^(1-n) n log(n) / 4."""
    return 0.25 * interleaved_q1(r, n) * r ** (1 - n) * n * math.log(n)


# ---------------------------------------------------------------------------
# Shortcut birth-death chain (drift right, jump n -> 2n, weak return edge)


@dataclass(frozen=True)
class LacoinParams:
    """Parameters of the shortcut chain on {0, ..., 2n}.

    ``beta_exp`` is the exponent scaling the escape probability at state n:
    the actual transition there is b * n^(-beta_exp).  The return probability
    c at state 2n is always derived from detailed balance, never supplied.
    """

    n: int
    a: float
    b: float
    beta_exp: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise InadmissibleParamsError(f"need n >= 2 (state n must differ from 2n), got {self.n}")
        if self.beta_exp < 0:
            raise InadmissibleParamsError("beta_exp must be >= 0")
        if not 0.0 < self.a < 1.0:
            raise InadmissibleParamsError(f"a must be in (0, 1), got {self.a!r}")
        if not self.a < self.b:
            raise InadmissibleParamsError(f"need a < b, got a={self.a!r}, b={self.b!r}")
        b_eff = self.b_effective
        if not 0.0 < b_eff <= 1.0 or self.a + b_eff > 1.0:
            raise InadmissibleParamsError(
                f"escape probability b n^-beta = {b_eff!r} leaves [0, 1 - a]"
            )
        c = self.c
        if not 0.0 <= c <= 1.0 - self.a:
            raise InadmissibleParamsError(f"derived return probability c = {c!r} leaves [0, 1 - a]")

    @property
    def b_effective(self) -> float:
        return self.b * self.n ** (-self.beta_exp)

    @property
    def c(self) -> float:
        """Return probability solving the detailed-balance constraint."""
        b_eff = self.b_effective
        return (
            (1.0 - self.a - b_eff)
            * self.a**self.n
            / (b_eff * (1.0 - self.a) ** (self.n - 1))
        )


def lacoin_log_stationary(params: LacoinParams) -> np.ndarray:
    """Log of the unnormalized stationary weights from the ratio formulas.

    pi(i)/pi(0) is ((1-a)/a)^i up to state n and (1-a)^(i-1) b_eff / a^i
    beyond; working in logs avoids the overflow of (1-a)^n / a^n for small a.
    """
    n, a = params.n, params.a
    log_ratio = math.log1p(-a) - math.log(a)
    i = np.arange(0, 2 * n + 1, dtype=float)
    logs = i * log_ratio
    upper = i > n
    logs[upper] += math.log(params.b_effective) - math.log1p(-a)
    return logs


def lacoin_chain(params: LacoinParams) -> MarkovChain:
    """Assemble the shortcut chain; stationary built in log space.

    The log-space construction is cross-checked against the dense linear
    solve on every entry large enough for the solver to resolve.
    """
    n, a = params.n, params.a
    b_eff = params.b_effective
    c = params.c
    size = 2 * n + 1
    kernel = np.zeros((size, size))
    kernel[0, 0] = a
    kernel[0, 1] = 1.0 - a
    for j in range(1, 2 * n):
        kernel[j, j - 1] = a
        if j == n:
            kernel[n, n + 1] = b_eff
            kernel[n, 2 * n] = 1.0 - a - b_eff
        else:
            kernel[j, j + 1] = 1.0 - a
    kernel[2 * n, 2 * n - 1] = a
    kernel[2 * n, n] += c
    kernel[2 * n, 2 * n] += 1.0 - a - c
    logs = lacoin_log_stationary(params)
    logs -= logs.max()
    pi = np.exp(logs)
    pi /= pi.sum()
    # cross-check against the dense solve where it can resolve: its absolute
    # error sits near 1e-18, so only entries above 1e-8 carry enough digits
    dense = stationary_distribution(kernel)
    resolvable = pi > 1e-8
    rel = np.abs(dense[resolvable] - pi[resolvable]) / pi[resolvable]
    if rel.size and float(rel.max()) > 1e-6:
        raise InadmissibleParamsError(
            f"log-space stationary disagrees with dense solve by {rel.max():.3g}"
        )
    return MarkovChain(
        kernel=kernel,
        stationary=pi,
        reversible=True,
        label=f"lacoin(n={n},a={a:g},b={params.b:g},beta={params.beta_exp:g})",
    )


def _poisson_crossing_term(t: float, k: float, denom: float) -> float:
    # e^{-t} (t e / k)^k sqrt(k) / denom, evaluated through logs
    log_val = -t + k * (1.0 + math.log(t / k)) + 0.5 * math.log(k)
    return math.exp(log_val) / denom


@dataclass(frozen=True)
class LacoinEnvelope:
    """The four bound values at one time; None marks an out-of-window bound.

    hd_sq_* bound the squared maximum Hellinger distance, tv_lb_early bounds
    the maximum total variation from below.
    """

    hd_sq_ub_wide: float | None
    hd_sq_ub: float | None
    hd_sq_lb_mid: float | None
    tv_lb_early: float | None


def lacoin_bound_envelope(params: LacoinParams, t: float) -> LacoinEnvelope:
    """Evaluate the four distance bounds of the shortcut chain at time t.

    Only defined in the flat regime beta_exp = 0 with a < b and a + b < 1/2.
    Each bound is returned only inside its stated time window; the mid-window
    lower bound is additionally dropped when its Poisson factor exceeds one,
    which leaves the bound without numeric meaning.
    """
    if params.beta_exp != 0.0:
        raise ValueError("bound envelope is only exposed for beta_exp = 0")
    a, b, n = params.a, params.b, params.n
    if not (a < b and a + b < 0.5):
        raise ValueError("bound envelope needs a < b and a + b < 1/2")
    if t <= 0:
        raise ValueError("t must be positive")
    rate = 1.0 - 2.0 * a
    ub_wide = None
    if t > (n + 1) / rate:
        ub_wide = 2.0 * a * t + b + _poisson_crossing_term(t, n + 1.0, rate * t - (n + 1))
    ub = None
    if t > 2.0 * n / rate:
        ub = 2.0 * a * t + _poisson_crossing_term(t, 2.0 * n, rate * t - 2 * n)
    lb_mid = None
    if n < t < 2 * n:
        x = _poisson_crossing_term(t, 2.0 * n, 2.0 * n - t)
        if x < 1.0:
            decay = (1.0 - a) ** (2 * n)
            lb_mid = 0.5 * (a + decay * b * (1.0 - x)) - math.sqrt(a * b * decay * (1.0 - x))
    tv_lb = None
    if 0 < t < n:
        tv_lb = 1.0 - 2.0 * a - _poisson_crossing_term(t, float(n), n - t)
    return LacoinEnvelope(
        hd_sq_ub_wide=ub_wide, hd_sq_ub=ub, hd_sq_lb_mid=lb_mid, tv_lb_early=tv_lb
    )


def b_n_delta(weights, b_values, delta: float) -> float:
    """Total shortcut strength over coordinates within (1 + delta) of the
    minimum weight: sum of b_i over {i : p_i < (1 + delta) min p}."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta!r}")
    p = np.asarray(weights, dtype=float)
    b = np.asarray(b_values, dtype=float)
    if p.shape != b.shape:
        raise ValueError("weights and b values must align")
    if np.any(p <= 0):
        raise ValueError("weights must be positive")
    p_hat = float(p.min())
    return float(b[p < (1.0 + delta) * p_hat].sum())


@dataclass(frozen=True)
class LacoinThresholds:
    delta_grid: np.ndarray
    b_values: np.ndarray
    p_hat: float

    def __post_init__(self):
        if np.any(np.diff(self.b_values) < -1e-12):
            raise ValueError("B values must be nondecreasing in delta")


def lacoin_thresholds(weights, b_values, delta_grid) -> LacoinThresholds:
    """B_n(delta) over a grid of deltas, packaged with the minimum weight."""
    grid = np.asarray(delta_grid, dtype=float)
    values = np.array([b_n_delta(weights, b_values, d) for d in grid])
    return LacoinThresholds(
        delta_grid=grid, b_values=values, p_hat=float(np.asarray(weights, dtype=float).min())
    )


def lacoin_product(params: LacoinParams, n_coords: int, weights=None) -> ProductSpec:
    """Product of identical shortcut coordinates (equal weights by default)."""
    coord = lacoin_chain(params)
    if weights is None:
        weights = np.ones(n_coords)
    return product_spec([coord] * n_coords, weights)


# ---------------------------------------------------------------------------
# Weight schedules


SCHEDULE_KINDS = ("geometric-2", "power-alpha", "log-ratio", "custom")


def weight_schedule(kind: str, n: int, alpha: float | None = None, custom=None) -> np.ndarray:
    """The coordinate weight schedules p_{n,1..n}; q_n is just the sum.

    geometric-2: 1 + 2^(i-n); power-alpha: 1 + (i/n)^alpha; log-ratio:
    1 + log(i)/log(n).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    i = np.arange(1, n + 1, dtype=float)
    if kind == "geometric-2":
        return 1.0 + 2.0 ** (i - n)
    if kind == "power-alpha":
        if alpha is None or alpha <= 0:
            raise ValueError("power-alpha needs alpha > 0")
        return 1.0 + (i / n) ** alpha
    if kind == "log-ratio":
        if n < 2:
            raise ValueError("log-ratio needs n >= 2")
        return 1.0 + np.log(i) / math.log(n)
    if kind == "custom":
        p = np.asarray(custom, dtype=float)
        if p.shape != (n,) or np.any(p <= 0):
            raise ValueError(f"custom schedule must be {n} positive weights")
        return p
    raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")


@dataclass(frozen=True)
class WeightSchedule:
    kind: str
    alpha: float | None = None
    custom: tuple | None = None

    def values(self, n: int) -> np.ndarray:
        return weight_schedule(self.kind, n, alpha=self.alpha, custom=self.custom)


# ---------------------------------------------------------------------------
# Families over an index, and the model registry for the CLI


def constant_family(chain: MarkovChain, label: str = "") -> FamilySpec:
    return FamilySpec(generator=lambda n: chain, label=label or chain.label or "constant")


def ehrenfest_family() -> FamilySpec:
    return FamilySpec(generator=ehrenfest_chain, label="ehrenfest")


def lazy_path_family() -> FamilySpec:
    return FamilySpec(generator=lazy_path_chain, label="lazy-path")


def cycle_family(weights: Callable[[int], float] | None = None) -> FamilySpec:
    return FamilySpec(generator=cycle_chain, label="cycle", weights=weights)


def cycle_superexp_family(gamma: float) -> FamilySpec:
    """Cycles with weights p_n = n^2 exp(-n^gamma).

    The weights underflow doubles quickly, so the log schedule is supplied
    alongside for the diagnostics that form weight ratios.
    """
    return FamilySpec(
        generator=cycle_chain,
        label=f"cycle-superexp({gamma:g})",
        weights=lambda n: n * n * math.exp(-(n**gamma)),
        log_weights=lambda n: 2.0 * math.log(n) - n**gamma,
    )


def two_state_family(alpha: float, beta: float) -> FamilySpec:
    chain = two_state_chain(alpha, beta).chain
    return FamilySpec(generator=lambda n: chain, label=f"two-state({alpha:g},{beta:g})")


def two_state_product_family(
    alpha: float, beta: float, weight_fn: Callable[[int], float] | None = None
) -> FamilySpec:
    """Member n is the product of n identical two-state chains started at 0.

    Feeds the product cutoff criteria; weights default to 1.
    """
    coord = two_state_chain(alpha, beta).chain
    w = weight_fn or (lambda i: 1.0)

    def generator(n: int) -> ProductSpec:
        return product_spec([coord] * n, [w(i) for i in range(1, n + 1)])

    return FamilySpec(
        generator=generator,
        label=f"two-state-product({alpha:g},{beta:g})",
        weights=w,
        starts=lambda n: [0] * n,
    )


def build_model(name: str, params: dict) -> MarkovChain:
    """Registry used by the CLI: model name plus key=value parameters."""
    if name == "two-state":
        return two_state_chain(params["alpha"], params["beta"]).chain
    if name == "cycle":
        return cycle_chain(int(params["n"]))
    if name == "ehrenfest":
        return ehrenfest_chain(int(params["n"]))
    if name == "lazy-path":
        return lazy_path_chain(int(params["n"]))
    if name == "lacoin":
        lp = LacoinParams(
            n=int(params["n"]),
            a=params["a"],
            b=params["b"],
            beta_exp=params.get("beta_exp", 0.0),
        )
        return lacoin_chain(lp)
    raise ValueError(f"unknown model {name!r}")


def build_family(name: str, params: dict) -> FamilySpec:
    if name == "ehrenfest":
        return ehrenfest_family()
    if name == "lazy-path":
        return lazy_path_family()
    if name == "cycle":
        return cycle_family()
    if name == "two-state":
        return two_state_family(params["alpha"], params["beta"])
    if name == "interleaved":
        return interleaved_family(params["r"])
    if name == "two-state-product":
        return two_state_product_family(params["alpha"], params["beta"])
    raise ValueError(f"unknown family {name!r}")
