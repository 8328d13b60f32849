"""Probability metrics between finite distributions: TV, Hellinger, L2.

Total variation is half the L1 gap, Hellinger is sqrt(1 - affinity), and the
L2 distance is the chi-square-type norm of mu/pi - 1 weighted by pi.  The
first two are in [0, 1]; the sandwich between them is what makes Hellinger
useful for products.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np


class DistanceKind(Enum):
    TV = "tv"
    HELLINGER = "hellinger"
    L2 = "l2"

    @property
    def rho(self) -> float:
        """Power-scale exponent: 1 for TV, 2 for Hellinger, undefined for L2."""
        if self is DistanceKind.TV:
            return 1.0
        if self is DistanceKind.HELLINGER:
            return 2.0
        raise ValueError("rho is undefined for the L2 distance")


def _pair(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(mu, dtype=float)
    b = np.asarray(nu, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def tv_distance(mu, nu) -> float:
    """Total variation distance, half the L1 norm of the difference."""
    a, b = _pair(mu, nu)
    return float(0.5 * np.abs(a - b).sum())


def hellinger_affinity(mu, nu) -> float:
    """Sum of sqrt(mu * nu), clamped into [0, 1] to absorb rounding."""
    a, b = _pair(mu, nu)
    return float(min(1.0, np.sqrt(a * b).sum()))


def hellinger_distance(mu, nu) -> float:
    """Hellinger distance sqrt(1 - sum sqrt(mu nu))."""
    return math.sqrt(max(0.0, 1.0 - hellinger_affinity(mu, nu)))


def l2_distance(mu, pi) -> float:
    """L2 distance (sum |mu/pi - 1|^2 pi)^(1/2); pi must be strictly positive."""
    a, p = _pair(mu, pi)
    if np.any(p <= 0):
        raise ValueError("zero stationary mass: L2 distance needs pi > 0 everywhere")
    return float(np.sqrt((((a / p) - 1.0) ** 2 * p).sum()))


def distance(kind: DistanceKind, mu, pi) -> float:
    """Dispatch on the metric kind; the second argument is the reference law."""
    if kind is DistanceKind.TV:
        return tv_distance(mu, pi)
    if kind is DistanceKind.HELLINGER:
        return hellinger_distance(mu, pi)
    if kind is DistanceKind.L2:
        return l2_distance(mu, pi)
    raise ValueError(f"unknown distance kind {kind!r}")


def sandwich_check(mu, nu) -> tuple[float, float]:
    """Slack of the two-sided TV/Hellinger comparison.

    Returns (dH^2 - (1 - sqrt(1 - dTV^2)), dTV - dH^2).  Both are nonnegative
    up to rounding for any pair of probabilities.
    """
    dtv = tv_distance(mu, nu)
    dh2 = max(0.0, 1.0 - hellinger_affinity(mu, nu))
    lower_gap = dh2 - (1.0 - math.sqrt(max(0.0, 1.0 - dtv * dtv)))
    upper_gap = dtv - dh2
    return lower_gap, upper_gap
