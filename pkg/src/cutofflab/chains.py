"""Finite Markov chains: validation, stationary distributions, powers, spectral gap.

A chain is the validated triple (kernel, stationary, reversible) wrapped in a
frozen dataclass.  All numerical state lives in plain float64 numpy arrays and
every operation is a pure function of its inputs, so values can be shared and
sent across threads freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ROW_SUM_ATOL = 1e-9
STATIONARY_ATOL = 1e-8
STATIONARY_RESIDUAL_TOL = 1e-10
REVERSIBLE_ATOL = 1e-10
SUPPORT_THRESHOLD = 1e-15
DENSE_SOLVE_LIMIT = 2000


class ReducibleError(ValueError):
    """The support graph of the kernel is not strongly connected."""


class NoConvergenceError(RuntimeError):
    """The stationary-distribution solver missed the required residual."""


class NotReversibleError(ValueError):
    """Operation requires a reversible chain."""


class EigenFailureError(RuntimeError):
    """The symmetric eigensolver did not converge."""


def as_distribution(weights, atol: float = ROW_SUM_ATOL) -> np.ndarray:
    """Validate and return a probability vector as a float64 array.

    Entries must be nonnegative and sum to one within ``atol``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError(f"distribution must be a vector, got shape {w.shape}")
    if w.size == 0:
        raise ValueError("distribution must be nonempty")
    if np.any(w < 0):
        raise ValueError(f"negative mass {w.min():.3g} in distribution")
    total = float(w.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"distribution sums to {total!r}, not 1 within {atol:g}")
    return w


def point_mass(n_states: int, state: int) -> np.ndarray:
    """Unit mass at ``state`` on a space of ``n_states`` points."""
    if not 0 <= state < n_states:
        raise ValueError(f"state {state} outside 0..{n_states - 1}")
    v = np.zeros(n_states)
    v[state] = 1.0
    return v


def as_stochastic_matrix(entries, atol: float = ROW_SUM_ATOL) -> np.ndarray:
    """Validate and return a row-stochastic square matrix as a float64 array."""
    k = np.asarray(entries, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square, got shape {k.shape}")
    if np.any(k < 0):
        i, j = np.unravel_index(int(np.argmin(k)), k.shape)
        raise ValueError(f"negative entry {k[i, j]:.3g} at ({i}, {j})")
    sums = k.sum(axis=1)
    bad = np.argmax(np.abs(sums - 1.0))
    if abs(sums[bad] - 1.0) > atol:
        raise ValueError(f"row {bad} sums to {sums[bad]!r}, not 1 within {atol:g}")
    return k


@dataclass(frozen=True)
class Violation:
    kind: str
    location: object
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _strongly_connected(kernel: np.ndarray, threshold: float = SUPPORT_THRESHOLD) -> bool:
    """Strong connectivity of the support graph by forward and backward BFS."""
    support = kernel > threshold
    n = support.shape[0]
    for adj in (support, support.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            reach = adj[frontier].any(axis=0) & ~seen
            frontier = np.flatnonzero(reach).tolist()
            seen |= reach
        if not seen.all():
            return False
    return True


def validate_chain(kernel, stationary=None) -> ValidationReport:
    """Structural checks of a transition matrix, plus stationarity if given.

    Reported kinds: NonStochasticRow, NegativeEntry, Reducible, NotStationary.
    All failures land in the report; only a non-square kernel raises.
    """
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square, got shape {k.shape}")
    violations: list[Violation] = []
    neg = np.argwhere(k < 0)
    for i, j in neg:
        violations.append(Violation("NegativeEntry", (int(i), int(j)), float(-k[i, j])))
    sums = k.sum(axis=1)
    for i in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_ATOL):
        violations.append(Violation("NonStochasticRow", int(i), float(abs(sums[i] - 1.0))))
    if not _strongly_connected(np.abs(k)):
        violations.append(Violation("Reducible", None, 1.0))
    if stationary is not None:
        pi = np.asarray(stationary, dtype=float)
        if pi.shape != (k.shape[0],):
            violations.append(Violation("NotStationary", "shape", float(pi.size)))
        else:
            if np.any(pi < 0) or abs(float(pi.sum()) - 1.0) > ROW_SUM_ATOL:
                violations.append(
                    Violation("NotStationary", "mass", float(abs(pi.sum() - 1.0)))
                )
            dev = np.abs(pi @ k - pi)
            worst = int(np.argmax(dev))
            if dev[worst] > STATIONARY_ATOL:
                violations.append(Violation("NotStationary", worst, float(dev[worst])))
    return ValidationReport(ok=not violations, violations=tuple(violations))


def stationary_distribution(kernel) -> np.ndarray:
    """Unique stationary distribution of an irreducible kernel.

    Dense linear solve of (K^T - I) pi = 0 with a normalization row up to
    2000 states; power iteration with Cesaro averaging above that.
    """
    k = as_stochastic_matrix(kernel)
    n = k.shape[0]
    if not _strongly_connected(k):
        raise ReducibleError("kernel support graph is not strongly connected")
    if n <= DENSE_SOLVE_LIMIT:
        a = k.T - np.eye(n)
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"dense stationary solve failed: {exc}") from exc
    else:
        pi = np.full(n, 1.0 / n)
        avg = pi.copy()
        for it in range(1, 200_000):
            pi = pi @ k
            avg += (pi - avg) / (it + 1)
            if it % 64 == 0 and np.max(np.abs(avg @ k - avg)) <= 1e-12:
                break
        pi = avg
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ k - pi)))
    if residual > STATIONARY_RESIDUAL_TOL:
        raise NoConvergenceError(f"stationary residual {residual:.3g} exceeds 1e-10")
    return pi


def power_distribution(start, kernel, m: int) -> np.ndarray:
    """Distribution after m steps, mu K^m, by repeated vector-matrix products."""
    v = as_distribution(start)
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2 or k.shape != (v.size, v.size):
        raise ValueError(f"dimension mismatch: start {v.shape}, kernel {k.shape}")
    if m < 0:
        raise ValueError("power must be nonnegative")
    for _ in range(int(m)):
        v = v @ k
    return v


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Irreducible finite Markov chain with its stationary distribution.

    Instances hash by identity, which makes them usable as cache keys for
    derived quantities (mixing times in particular).
    """

    kernel: np.ndarray
    stationary: np.ndarray
    reversible: bool
    label: str = ""

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]


def is_reversible(kernel, stationary, atol: float = REVERSIBLE_ATOL) -> bool:
    """Detailed balance pi(x) K(x,y) = pi(y) K(y,x) within ``atol``."""
    k = np.asarray(kernel, dtype=float)
    pi = np.asarray(stationary, dtype=float)
    flux = pi[:, None] * k
    return bool(np.max(np.abs(flux - flux.T)) <= atol)


def make_chain(kernel, stationary=None, label: str = "") -> MarkovChain:
    """Validate inputs and assemble a MarkovChain.

    With ``stationary`` omitted it is computed by ``stationary_distribution``.
    Any validation violation raises ValueError (Reducible as its subclass).
    """
    k = as_stochastic_matrix(kernel)
    if stationary is None:
        pi = stationary_distribution(k)
    else:
        pi = as_distribution(stationary)
        report = validate_chain(k, pi)
        if not report.ok:
            if "Reducible" in report.kinds():
                raise ReducibleError(f"invalid chain: {report.violations}")
            raise ValueError(f"invalid chain: {report.violations}")
    if not _strongly_connected(k):
        raise ReducibleError("kernel support graph is not strongly connected")
    return MarkovChain(kernel=k, stationary=pi, reversible=is_reversible(k, pi), label=label)


def spectral_gap(chain: MarkovChain) -> float:
    """Smallest nonzero eigenvalue of I - K for a reversible chain."""
    if not chain.reversible:
        raise NotReversibleError(f"chain {chain.label!r} is not reversible")
    if chain.n_states < 2:
        raise ValueError("spectral gap needs at least two states")
    s = np.sqrt(chain.stationary)
    sym = chain.kernel * (s[:, None] / s[None, :])
    sym = 0.5 * (sym + sym.T)
    try:
        eigs = np.linalg.eigvalsh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(f"symmetric eigensolver failed: {exc}") from exc
    return float(1.0 - eigs[-2])


def chain_to_dict(chain: MarkovChain) -> dict:
    return {
        "label": chain.label,
        "matrix": chain.kernel.tolist(),
        "stationary": chain.stationary.tolist(),
    }


def chain_from_dict(data: dict) -> MarkovChain:
    """Build a chain from the JSON chain format, rejecting any violation."""
    if "matrix" not in data:
        raise ValueError("chain file needs a 'matrix' field")
    return make_chain(
        data["matrix"],
        stationary=data.get("stationary"),
        label=str(data.get("label", "")),
    )


def load_chain(path) -> MarkovChain:
    with open(path, "r", encoding="utf-8") as fh:
        return chain_from_dict(json.load(fh))


def save_chain(chain: MarkovChain, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(chain_to_dict(chain), fh, indent=2)
        fh.write("\n")
