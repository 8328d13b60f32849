"""Uniformization against the matrix-exponential oracle, distance curves,
mixing times, lazification."""

import io
import math

import numpy as np
import pytest
from scipy.linalg import expm

from cutofflab import (
    MAX,
    BudgetExceededError,
    DistanceKind,
    NoUpperBracketError,
    UniformizationParams,
    distance_at,
    distance_curve,
    heat_kernel_matrix,
    heat_kernel_row,
    hellinger_affinity,
    lazify,
    max_distance_at,
    mixing_time,
    point_mass,
    power_distribution,
    spectral_gap,
    tv_distance,
    write_curve_csv,
)
from cutofflab.models import lazy_path_chain, two_state_chain

from conftest import random_chain, random_reversible_chain


def expm_row(chain, start, t):
    return np.asarray(start) @ expm(-t * (np.eye(chain.n_states) - chain.kernel))


# -- heat kernel ---------------------------------------------------------------


def test_time_zero_is_identity():
    ts = two_state_chain(0.3, 0.7).chain
    mu = np.array([0.25, 0.75])
    assert heat_kernel_row(ts, mu, 0.0) == pytest.approx(mu)
    assert heat_kernel_matrix(ts, 0.0) == pytest.approx(np.eye(2))


def test_two_state_mass_formula():
    # kernel entry (0,0) at time t is b/(a+b) + a/(a+b) e^{-(a+b)t}
    ts = two_state_chain(0.5, 0.5)
    for t in (0.1, 1.0, 3.7):
        row = heat_kernel_row(ts.chain, point_mass(2, 0), t)
        assert row[0] == pytest.approx(0.5 + 0.5 * math.exp(-t), abs=1e-12)


def test_three_cycle_against_expm():
    from cutofflab.models import cycle_chain

    chain = cycle_chain(2)
    row = heat_kernel_row(chain, point_mass(3, 0), 1.0)
    assert row == pytest.approx(expm_row(chain, point_mass(3, 0), 1.0), abs=1e-10)


def test_random_chains_against_expm(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        chain = random_chain(rng, n)
        t = float(rng.uniform(0.0, 10.0))
        mu = rng.random(n)
        mu /= mu.sum()
        assert heat_kernel_row(chain, mu, t) == pytest.approx(
            expm_row(chain, mu, t), abs=1e-10
        )


def test_windowed_large_time_against_expm():
    # lower truncation plus binary powering must agree with expm
    chain = lazy_path_chain(24)
    mat = heat_kernel_matrix(chain, 500.0)
    direct = expm(-500.0 * (np.eye(25) - chain.kernel))
    assert mat == pytest.approx(direct, abs=1e-12)


def test_semigroup_property(rng):
    params = UniformizationParams(tail_tol=1e-12)
    for _ in range(5):
        chain = random_chain(rng, int(rng.integers(2, 7)))
        mu = rng.random(chain.n_states)
        mu /= mu.sum()
        t, s = float(rng.uniform(0, 4)), float(rng.uniform(0, 4))
        once = heat_kernel_row(chain, mu, t + s, params)
        twice = heat_kernel_row(chain, heat_kernel_row(chain, mu, t, params), s, params)
        assert np.abs(once - twice).max() <= 2 * params.tail_tol + 1e-10


def test_tail_budget_guard():
    ts = two_state_chain(0.5, 0.5).chain
    with pytest.raises(BudgetExceededError):
        heat_kernel_row(ts, point_mass(2, 0), 1e9, UniformizationParams(max_terms=1000))


def test_params_validation():
    with pytest.raises(ValueError):
        UniformizationParams(tail_tol=1e-3)


# -- distances along time ------------------------------------------------------


def test_distance_at_stationary_start_is_zero():
    ts = two_state_chain(0.3, 0.1).chain
    assert distance_at(ts, DistanceKind.TV, ts.stationary, 0.0) == pytest.approx(0.0)


def test_two_state_tv_decay():
    # d_TV(0, t) = a/(a+b) e^{-(a+b)t}; a = b = 1/4 gives e^{-t/2}/2
    ts = two_state_chain(0.25, 0.25).chain
    for t in (0.0, 1.0, 2.5, 10.0):
        assert distance_at(ts, DistanceKind.TV, point_mass(2, 0), t) == pytest.approx(
            0.5 * math.exp(-0.5 * t), abs=1e-10
        )


def test_two_state_hellinger_matches_closed_form():
    ts = two_state_chain(0.6, 0.2)
    for t in (0.3, 1.0, 4.0):
        num = distance_at(ts.chain, DistanceKind.HELLINGER, point_mass(2, 0), t)
        assert num * num == pytest.approx(ts.hellinger_sq_zero(t), abs=1e-10)


def test_max_distance_at_zero_time(rng):
    for _ in range(5):
        chain = random_chain(rng, int(rng.integers(2, 8)))
        expected = 1.0 - chain.stationary.min()
        assert max_distance_at(chain, DistanceKind.TV, 0.0) == pytest.approx(expected)


def test_max_symmetric_two_state():
    ts = two_state_chain(0.3, 0.3).chain
    for t in (0.5, 2.0):
        assert max_distance_at(ts, DistanceKind.TV, t) == pytest.approx(
            0.5 * math.exp(-0.6 * t), abs=1e-10
        )


def test_curves_monotone(rng):
    grid = np.linspace(0.0, 6.0, 25)
    for kind in (DistanceKind.TV, DistanceKind.HELLINGER, DistanceKind.L2):
        chain = random_chain(rng, 6)
        curve = distance_curve(chain, kind, point_mass(6, 0), grid)
        assert np.all(np.diff(curve.values) <= 1e-9)
        curve_max = distance_curve(chain, DistanceKind.TV, MAX, grid)
        assert np.all(np.diff(curve_max.values) <= 1e-9)


def test_fixed_and_max_sandwich_along_time(rng):
    # the TV/Hellinger comparison holds at sampled times for both variants
    for _ in range(10):
        chain = random_chain(rng, int(rng.integers(2, 7)))
        t = float(rng.uniform(0, 5))
        mu = rng.random(chain.n_states)
        mu /= mu.sum()
        for dtv, dh in [
            (
                distance_at(chain, DistanceKind.TV, mu, t),
                distance_at(chain, DistanceKind.HELLINGER, mu, t),
            ),
            (
                max_distance_at(chain, DistanceKind.TV, t),
                max_distance_at(chain, DistanceKind.HELLINGER, t),
            ),
        ]:
            assert 1.0 - math.sqrt(max(0.0, 1.0 - dtv * dtv)) <= dh * dh + 1e-12
            assert dh * dh <= dtv + 1e-12


# -- mixing times ---------------------------------------------------------------


def test_already_mixed_returns_zero():
    ts = two_state_chain(0.5, 0.5).chain
    mt = mixing_time(ts, DistanceKind.TV, 0.9, start=point_mass(2, 0))
    assert mt.value == 0.0


def test_two_state_log_two():
    ts = two_state_chain(0.5, 0.5).chain
    mt = mixing_time(ts, DistanceKind.TV, 0.25, start=point_mass(2, 0))
    assert mt.value == pytest.approx(math.log(2.0), abs=1e-5)
    assert mt.resolution <= 2e-6 * mt.value


def test_discrete_mixing_smallest_integer():
    # alpha = beta = 1/2 hits stationarity exactly after one step
    ts = two_state_chain(0.5, 0.5).chain
    mt = mixing_time(ts, DistanceKind.TV, 0.25, start=point_mass(2, 0), mode="discrete")
    assert mt.value == 1
    # alpha = beta = 1/4: d(m) = 2^{-(m+1)} first drops to 1/100 at m = 6
    quarter = two_state_chain(0.25, 0.25).chain
    mt6 = mixing_time(quarter, DistanceKind.TV, 0.01, start=point_mass(2, 0), mode="discrete")
    assert mt6.value == 6


def test_mixing_comparison_brackets(rng):
    # T_TV(eps sqrt(2 - eps^2)) <= T_H(eps) <= T_TV(eps^2), continuous and discrete
    eps = 0.3
    for _ in range(6):
        chain = random_chain(rng, int(rng.integers(2, 7)))
        for mode in ("continuous", "discrete"):
            t_h = mixing_time(chain, DistanceKind.HELLINGER, eps, mode=mode)
            t_lo = mixing_time(chain, DistanceKind.TV, eps * math.sqrt(2 - eps * eps), mode=mode)
            t_hi = mixing_time(chain, DistanceKind.TV, eps * eps, mode=mode)
            slack = t_h.resolution + t_lo.resolution + t_hi.resolution if mode == "continuous" else 0
            assert t_lo.value <= t_h.value + slack
            assert t_h.value <= t_hi.value + slack


def test_no_upper_bracket_for_frozen_chain():
    # nearly frozen two-state chain: distance stays high past any laptop horizon
    ts = two_state_chain(1e-12, 1e-12).chain
    with pytest.raises((NoUpperBracketError, BudgetExceededError)):
        mixing_time(ts, DistanceKind.TV, 0.01, start=point_mass(2, 0), max_doublings=12)


def test_epsilon_validation():
    ts = two_state_chain(0.5, 0.5).chain
    with pytest.raises(ValueError):
        mixing_time(ts, DistanceKind.TV, 1.5)


# -- lazify ---------------------------------------------------------------------


def test_lazify_preserves_stationary(rng):
    chain = random_chain(rng, 5)
    lazy = lazify(chain, 0.3)
    assert lazy.stationary is chain.stationary
    assert np.max(np.abs(lazy.stationary @ lazy.kernel - lazy.stationary)) <= 1e-12


def test_lazify_two_state_map():
    ts = two_state_chain(0.5, 0.5).chain
    lazy = lazify(ts, 0.5)
    assert lazy.kernel == pytest.approx(np.array([[0.75, 0.25], [0.25, 0.75]]))


def test_lazify_scales_gap(rng):
    chain = random_reversible_chain(rng, 6)
    for theta in (0.25, 0.5):
        assert spectral_gap(lazify(chain, theta)) == pytest.approx(
            (1 - theta) * spectral_gap(chain), abs=1e-10
        )


# -- submultiplicativity and the two-state comparison limit ----------------------


def test_submultiplicative_scaled_distances(rng):
    # 4 dH and 2 dTV are submultiplicative for the max distances
    for _ in range(8):
        chain = random_reversible_chain(rng, int(rng.integers(2, 7)))
        for _ in range(4):
            t, s = float(rng.uniform(0.05, 3)), float(rng.uniform(0.05, 3))
            dh_t = max_distance_at(chain, DistanceKind.HELLINGER, t)
            dh_s = max_distance_at(chain, DistanceKind.HELLINGER, s)
            dh_ts = max_distance_at(chain, DistanceKind.HELLINGER, t + s)
            assert 4 * dh_ts <= (4 * dh_t) * (4 * dh_s) + 1e-10
            tv_t = max_distance_at(chain, DistanceKind.TV, t)
            tv_s = max_distance_at(chain, DistanceKind.TV, s)
            tv_ts = max_distance_at(chain, DistanceKind.TV, t + s)
            assert 2 * tv_ts <= (2 * tv_t) * (2 * tv_s) + 1e-10


def test_two_state_comparison_ratio_limit():
    # (1 - sqrt(1 - dTV^2)) / dH^2 approaches 4ab/(a+b)^2 = 0.75 at (0.3, 0.1)
    ts = two_state_chain(0.3, 0.1)
    m = 0
    while ts.tv_zero_steps(m) >= 1e-4:
        m += 1
    mu = power_distribution(point_mass(2, 0), ts.chain.kernel, m)
    dtv = tv_distance(mu, ts.chain.stationary)
    dh2 = 1.0 - hellinger_affinity(mu, ts.chain.stationary)
    ratio = (1.0 - math.sqrt(1.0 - dtv * dtv)) / dh2
    assert ratio == pytest.approx(0.75, rel=0.01)


# -- curve CSV -------------------------------------------------------------------


def test_curve_csv_format():
    ts = two_state_chain(0.5, 0.5).chain
    curve = distance_curve(ts, DistanceKind.TV, point_mass(2, 0), np.linspace(0, 2, 5))
    buf = io.StringIO()
    write_curve_csv(curve, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "t,value,kind,start"
    assert len(lines) == 6
    assert lines[1].endswith("tv,state0")
