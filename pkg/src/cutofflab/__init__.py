"""Numerical laboratory for mixing times and cutoff diagnostics of finite
Markov chains and their products."""

from .chains import (
    EigenFailureError,
    MarkovChain,
    NoConvergenceError,
    NotReversibleError,
    ReducibleError,
    ValidationReport,
    as_distribution,
    as_stochastic_matrix,
    chain_from_dict,
    chain_to_dict,
    is_reversible,
    load_chain,
    make_chain,
    point_mass,
    power_distribution,
    save_chain,
    spectral_gap,
    stationary_distribution,
    validate_chain,
)
from .cutoff import (
    CutoffReport,
    DnDecomposition,
    FamilySpec,
    MixingProfile,
    RDiagnostic,
    VerdictThresholds,
    cutoff_ratio_diagnostic,
    default_epsilon,
    discrete_profile_values,
    dn_decomposition,
    f_n_evaluator,
    mixing_profile,
    r_estimator,
    two_state_product_cutoff_predictor,
    window_diagnostic,
)
from .distances import (
    DistanceKind,
    distance,
    hellinger_affinity,
    hellinger_distance,
    l2_distance,
    sandwich_check,
    tv_distance,
)
from .kernel import (
    DEFAULT_PARAMS,
    MAX,
    BudgetExceededError,
    DistanceCurve,
    MixingTime,
    NoUpperBracketError,
    UniformizationParams,
    distance_at,
    distance_curve,
    heat_kernel_matrix,
    heat_kernel_row,
    invert_monotone,
    lazify,
    max_distance_at,
    mixing_time,
    write_curve_csv,
)
from .models import (
    InadmissibleParamsError,
    LacoinEnvelope,
    LacoinParams,
    LacoinThresholds,
    TwoStateChain,
    WeightSchedule,
    b_n_delta,
    build_family,
    build_model,
    cycle_chain,
    ehrenfest_chain,
    ex2p_fn,
    interleaved_family,
    interleaved_odd_cutoff_time,
    interleaved_odd_product,
    interleaved_q1,
    interleaved_q2,
    lacoin_bound_envelope,
    lacoin_chain,
    lacoin_product,
    lacoin_thresholds,
    lazy_path_chain,
    two_state_chain,
    weight_schedule,
)
from .product import (
    BoundBracket,
    ProductSpec,
    TimeTooSmallError,
    TooLargeError,
    cached_max_mixing_time,
    coordinate_distances,
    dense_product_chain,
    dense_product_start,
    load_product_spec,
    prodmixing_bounds,
    prodmixing_lower_branches,
    prodmixing_upper_simple,
    product_hellinger_exact,
    product_mixing_time_bracket,
    product_spec,
    product_tv_bracket,
    product_tv_sandwich,
    sum_bound,
    tail_bound_hellinger,
    tail_bound_tv,
)

__version__ = "0.1.0"
