"""Family diagnostics: profiles, ratio/window verdicts, F/G, S(n,m,c), D_n,
and the two-state product predictor."""

import math

import numpy as np
import pytest

from cutofflab import (
    DistanceKind,
    FamilySpec,
    VerdictThresholds,
    cutoff_ratio_diagnostic,
    discrete_profile_values,
    dn_decomposition,
    f_n_evaluator,
    mixing_profile,
    point_mass,
    r_estimator,
    two_state_product_cutoff_predictor,
    window_diagnostic,
)
from cutofflab.cutoff import VERDICT_CUTOFF, VERDICT_INCONCLUSIVE, VERDICT_NO_CUTOFF
from cutofflab.models import (
    cycle_family,
    cycle_superexp_family,
    ehrenfest_family,
    lazy_path_family,
    two_state_chain,
    two_state_family,
    two_state_product_family,
)

TV = DistanceKind.TV
HD = DistanceKind.HELLINGER


# -- mixing profiles ---------------------------------------------------------------


def test_constant_two_state_profile():
    # symmetric rate-1/2 coordinates: max TV is e^{-t}/2, so T(eps) = log(1/(2 eps))
    fam = two_state_family(0.5, 0.5)
    prof = mixing_profile(fam, TV, 0.25, [1, 2, 3, 4])
    assert prof.complete
    assert prof.times == pytest.approx(np.full(4, math.log(2.0)), rel=1e-4)


def test_profile_records_failures():
    def generator(n):
        if n == 2:
            raise RuntimeError("boom")
        return two_state_chain(0.5, 0.5).chain

    prof = mixing_profile(FamilySpec(generator=generator), TV, 0.25, [1, 2, 3])
    assert not prof.complete
    assert set(prof.failures) == {2}
    assert np.isnan(prof.times[1]) and np.isfinite(prof.times[0])


# -- ratio and window diagnostics ----------------------------------------------------


def test_constant_family_ratio_verdicts():
    fam = two_state_family(0.3, 0.3)
    report = cutoff_ratio_diagnostic(fam, TV, 0.1, 0.9, [1, 2, 3, 4])
    # constant ratio above 1: flatness reads as no cutoff once "away" is crossed
    assert np.allclose(report.ratios, report.ratios[0])
    assert report.verdict == VERDICT_NO_CUTOFF


def test_ratio_requires_distinct_levels():
    fam = two_state_family(0.3, 0.3)
    with pytest.raises(ValueError):
        cutoff_ratio_diagnostic(fam, TV, 0.5, 0.5, [1, 2, 3, 4])


def test_too_few_indices_inconclusive():
    fam = two_state_family(0.3, 0.3)
    report = cutoff_ratio_diagnostic(fam, TV, 0.1, 0.9, [1, 2, 3])
    assert report.verdict == VERDICT_INCONCLUSIVE


def test_ehrenfest_ratios_decrease_toward_one():
    report = cutoff_ratio_diagnostic(ehrenfest_family(), TV, 0.1, 0.9, [8, 16, 32, 64])
    assert np.all(np.diff(report.ratios) < 0)
    assert report.verdict == VERDICT_CUTOFF


def test_lazy_path_ratios_stay_away_from_one():
    report = cutoff_ratio_diagnostic(lazy_path_family(), TV, 0.1, 0.9, [16, 32, 64, 128])
    assert np.all(report.ratios > 100.0)
    assert report.verdict == VERDICT_NO_CUTOFF


def test_window_diagnostic_constant_family():
    fam = two_state_family(0.4, 0.4)
    report = window_diagnostic(fam, TV, 0.2, [1, 2, 3, 4])
    assert np.allclose(report.windows, report.windows[0])


def test_window_reports_reference_scale():
    fam = ehrenfest_family()
    report = window_diagnostic(fam, TV, 0.2, [8, 16, 32, 64], b_reference=lambda n: float(n))
    assert len(report.trend_summary["window_over_b"]) == 4
    assert len(report.trend_summary["sqrtT_over_b"]) == 4


# -- F and G -----------------------------------------------------------------------


def test_f_zero_when_mixed():
    fam = two_state_product_family(0.5, 0.5)
    f, g = f_n_evaluator(fam, 500.0, 4)
    assert f == pytest.approx(0.0, abs=1e-9)
    assert g == pytest.approx(0.0, abs=1e-6)


def test_f_single_coordinate_substitution():
    # a point mass against the uniform law on four states has squared
    # Hellinger distance exactly 1/2, so F = 1 and G = sqrt(1/2) at t = 0
    from cutofflab import FamilySpec, product_spec
    from cutofflab.models import lazy_path_chain

    fam = FamilySpec(generator=lambda n: product_spec([lazy_path_chain(3)], [1.0]))
    f, g = f_n_evaluator(fam, 0.0, 1)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert g == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_f_saturates_to_inf(monkeypatch):
    # a factor at full distance turns the denominator into 1/0 := inf;
    # unreachable for positive stationary laws, so drive it directly
    import cutofflab.cutoff as cutoff_mod

    fam = two_state_product_family(0.5, 0.5)
    monkeypatch.setattr(
        cutoff_mod, "coordinate_distances", lambda *a, **k: np.array([1.0, 0.3])
    )
    f, g = f_n_evaluator(fam, 1.0, 2)
    assert g == 1.0 and math.isinf(f)


def test_f_discriminates_around_cutoff_time():
    # around t_n the functional drops from large to small (frozen regression:
    # F(0.5 t_n) >= 2, F(1.5 t_n) <= 0.01 at n = 1024)
    fam = two_state_product_family(0.5, 0.5)
    n = 1024
    _, t_n, _ = two_state_product_cutoff_predictor([0.5] * n, [0.5] * n, [1.0] * n, n)
    f_early, _ = f_n_evaluator(fam, 0.5 * t_n, n)
    f_late, _ = f_n_evaluator(fam, 1.5 * t_n, n)
    assert f_early >= 2.0
    assert f_late <= 0.01


# -- S(n, m, c) ----------------------------------------------------------------------


def geometric_weight_family():
    chain = two_state_chain(0.5, 0.5).chain
    return FamilySpec(
        generator=lambda n: chain,
        label="two-state-geometric",
        weights=lambda n: math.exp(-n),
        log_weights=lambda n: -float(n),
    )


def test_single_term_sum():
    fam = geometric_weight_family()
    diag = r_estimator(fam, TV, 0.5, [5], [4])
    from cutofflab import cached_max_mixing_time

    t1 = cached_max_mixing_time(fam.generator(1), TV, 0.25).value
    expected = 0.5 ** (0.5 * diag.s_values[0] * math.exp(-1.0) / t1)
    assert diag.grid[0, 0] == pytest.approx(expected, rel=1e-9)


def test_superexp_cycle_grid_decays():
    diag = r_estimator(cycle_superexp_family(2.0), TV, 0.5, [8, 16, 32, 64], [0, 1, 2, 3, 4])
    assert np.all(np.isfinite(diag.grid))
    assert np.all(np.diff(diag.grid, axis=0) <= 0.0)  # non-increasing in n per fixed m
    assert np.all(np.diff(diag.grid, axis=1) <= 0.0)  # non-increasing in m


def test_geometric_tail_dominates_sums():
    # terms are at most ((2 rho eps)^c)^(n - i), a geometric series
    fam = geometric_weight_family()
    diag = r_estimator(fam, TV, 0.5, [6, 8, 10, 12], [0, 1, 2, 3])
    ratio = 0.5**0.5
    for col, m in enumerate(diag.m_list):
        assert np.all(diag.grid[:, col] <= ratio**m / (1.0 - ratio) + 1e-12)


def test_grid_monotone_in_c():
    fam = geometric_weight_family()
    low_c = r_estimator(fam, TV, 0.5, [6, 8, 10, 12], [0, 1, 2])
    high_c = r_estimator(fam, TV, 0.9, [6, 8, 10, 12], [0, 1, 2])
    assert np.all(high_c.grid <= low_c.grid + 1e-15)


def test_epsilon_schedule_validated():
    fam = FamilySpec(
        generator=lambda n: two_state_chain(0.5, 0.5).chain,
        weights=lambda n: 1.0,
        epsilon_schedule=lambda n: 0.6,  # outside (0, 1/2) for TV
    )
    with pytest.raises(ValueError, match="epsilon"):
        r_estimator(fam, TV, 0.5, [4], [0])


# -- D_n --------------------------------------------------------------------------


def test_constant_family_with_exponential_weights():
    fam = two_state_family(0.5, 0.5)
    dec = dn_decomposition(
        fam,
        TV,
        weights=lambda n: math.exp(-n),
        indices=range(1, 9),
        a_candidate=lambda n: 1.0,
        b_candidate=lambda n: 0.0,
    )
    assert dec.increments == pytest.approx(np.ones(7), abs=1e-4)
    assert dec.flags["d_nondecreasing"]
    assert dec.flags["b_nondecreasing"]
    # residual C_n = log T, constant across n
    assert np.ptp(dec.c_residuals) <= 1e-4


def test_cycle_family_increment_growth():
    # p_n = n^2 exp(-n^gamma), gamma = 2: increments at least n^{gamma-1}
    fam = cycle_superexp_family(2.0)
    indices = list(range(6, 15))
    dec = dn_decomposition(fam, TV, None, indices, epsilon=0.25)
    lower = np.array(indices[:-1], dtype=float)
    assert np.all(dec.increments >= lower)


def test_decreasing_d_is_flagged():
    fam = two_state_family(0.5, 0.5)
    dec = dn_decomposition(fam, TV, weights=lambda n: float(n), indices=range(1, 6))
    assert not dec.flags["d_nondecreasing"]


def test_dn_requires_weights():
    with pytest.raises(ValueError, match="weights"):
        dn_decomposition(two_state_family(0.5, 0.5), TV, None, [1, 2, 3])


# -- two-state product predictor ---------------------------------------------------


def test_predictor_growth_flag_and_time():
    n = 64
    growing, t_n, b_n = two_state_product_cutoff_predictor(
        [0.5] * n, [0.5] * n, [1.0] * n, n
    )
    assert growing
    assert t_n == pytest.approx(n * math.log(1 + n) / 2.0)
    assert b_n == pytest.approx(math.sqrt(t_n * n))


def test_predictor_bounded_when_weights_absorb_growth():
    n = 64
    weights = [math.log(1 + j) for j in range(1, n + 1)]
    growing, _, _ = two_state_product_cutoff_predictor([0.5] * n, [0.5] * n, weights, n)
    assert not growing


def test_predictor_small_case_arithmetic():
    # alpha = beta = 1/2 and unit weights at n = 3: t_3 = 3 log(4) / 2
    _, t_3, _ = two_state_product_cutoff_predictor([0.5] * 3, [0.5] * 3, [1.0] * 3, 3)
    assert t_3 == pytest.approx(3.0 * math.log(4.0) / 2.0)


def test_predictor_validations():
    with pytest.raises(ValueError, match="monoton"):
        two_state_product_cutoff_predictor([0.5] * 3, [0.5] * 3, [2.0, 1.0, 3.0], 3)
    with pytest.raises(ValueError, match="rates"):
        two_state_product_cutoff_predictor([0.5, 0.0, 0.5], [0.5] * 3, [1.0] * 3, 3)


# -- floor/ceiling reporting ---------------------------------------------------------


def test_discrete_profile_reports_both_roundings():
    chain = two_state_chain(0.25, 0.25).chain
    lo, hi = discrete_profile_values(chain, TV, a=0.7, t=5.0, start=point_mass(2, 0))
    # a t = 3.5: floor 3 and ceiling 4 steps
    assert lo == pytest.approx(0.5 * 0.5**3)
    assert hi == pytest.approx(0.5 * 0.5**4)
    assert lo >= hi
