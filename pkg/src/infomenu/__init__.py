"""Revenue-maximizing menus of statistical experiments.

Exact LP solves for finite state spaces, a sample-based mechanism for large
or infinite ones, and a complete pipeline for Gaussian states with
quadratic-loss buyer types (scalar-experiment reduction, SDP menu design,
full-surplus test, deterministic lifting), plus independent verification
oracles.
"""

__version__ = "0.1.0"

from .core import (
    Experiment,
    FiniteInstance,
    Menu,
    MenuEntry,
    baseline_action,
    baseline_utility,
    experiment_value,
    full_information_value,
    responsive_value,
)
from .menu_lp import (
    LpSolveReport,
    MenuLpProblem,
    build_menu_lp,
    build_menu_lp_from_values,
    full_info_revenue,
    solve_exact,
    solve_menu_lp,
)
from .lazy import (
    FiniteStateOracle,
    LazyTranscript,
    RevenueEstimate,
    StateOracle,
    UniformLineOracle,
    coarsen_to_responsive,
    estimate_mechanism_revenue,
    repair_menu_prices,
    run_lazy_experiment,
    run_lazy_state_independent_price,
    sample_budget,
)
from .gaussian import (
    GaussianInstance,
    GaussianMenu,
    GaussianMenuEntry,
    ScalarGaussianExperiment,
    SdpSolution,
    check_full_surplus,
    evaluate_gaussian_menu,
    extract_rank_one,
    full_surplus_menu,
    full_surplus_revenue,
    lift_to_deterministic,
    posterior_covariance_scalar,
    reduce_to_scalar,
    scalar_experiment_value,
    solve_gaussian_menu,
    solve_menu_sdp,
    whiten_prior,
)
from .bench import (
    GridOracleResult,
    ViolationReport,
    build_diff_value_instance,
    check_ic_ir,
    check_obedience,
    finite_grid_oracle,
    finite_single_experiment_revenue,
    gaussian_grid_oracle,
    random_gaussian_instance,
    random_instance,
    single_item_full_revelation_revenue,
)
from .conic import ConicProblem, ConicResult, solve as solve_conic

__all__ = [name for name in dir() if not name.startswith("_")]
