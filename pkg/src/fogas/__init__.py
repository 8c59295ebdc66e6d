"""Feature-occupancy gradient ascent for offline RL in linear MDPs."""

from .data import (
    Covariance,
    OfflineDataset,
    PsiHat,
    Transition,
    apply_psi_hat,
    build_covariance,
    collect_dataset,
    estimate_psi,
    load_dataset,
    save_dataset,
)
from .diagnostics import (
    Comparators,
    GapReport,
    build_comparators,
    duality_gap_report,
    eval_f,
    eval_f_hat,
    gap_estimation_error,
    player_regrets,
)
from .linmdp import (
    LinearMdp,
    SoftmaxPolicy,
    TabularPolicy,
    generate_linear_mdp,
    load_mdp,
    policy_update_step,
    save_mdp,
    softmax_from_logit_param,
    uniform_policy,
    validate_linear_mdp,
)
from .oracle import (
    PolicyEvaluation,
    coverage_ratio,
    evaluate_policy,
    relaxed_lp_feasibility,
    solve_optimal,
)
from .solver import (
    FogasConfig,
    FogasRun,
    FogasTrajectory,
    best_response_theta,
    gradient_norm_bound,
    lambda_gradient,
    lambda_update,
    load_run,
    mu_hat_features,
    run_fogas,
    save_run,
    theoretical_min_iterations,
    theoretical_rates,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
