"""Stochastic splitting proximal gradient: solver, problem families, experiments.

Per iteration the solver samples one component index, takes a gradient step on
the sampled smooth piece, then applies the proximal operator of the sampled
nonsmooth piece at the same index.  Subpackages cover the engine, the cosparse
sparse-representation and convex-feasibility problem families, a deterministic
proximal-gradient baseline, and seed-averaged experiment drivers.
"""

from .analysis import (
    RateReport,
    constant_step_bound,
    emit_trace_csv,
    fit_rate_exponent,
    loglog_fit,
    phi,
    plateau_level,
    read_mean_trace_csv,
    read_trace_csv,
    recurrence_envelope,
    semilog_fit,
)
from .core import (
    FixedProxOracle,
    IdentityProxOracle,
    ProxOracle,
    SmoothOracle,
    StepsizeSchedule,
    TheoryConstants,
    ZeroSmoothOracle,
    constant_schedule,
    eval_full_objective,
    moreau_envelope,
    polynomial_schedule,
    prox_optimality_residual,
    spectral_norm_sq,
    stepsize,
)
from .engine import (
    DivergenceError,
    MeanTrace,
    RecurrenceReport,
    SolverState,
    StoppingRule,
    Trace,
    check_recurrence,
    dist_rule,
    max_iter_rule,
    run_monte_carlo,
    run_sspg,
    sspg_step,
)
from .experiments import (
    AtomsScalingParams,
    CfpLinearParams,
    ConfigError,
    ExperimentConfig,
    IterationsComparisonParams,
    RateSweepParams,
    RecurrenceCheckParams,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    run_experiment,
    save_config,
)
from .feasibility import (
    Ball,
    CFPProblem,
    Halfspace,
    Hyperplane,
    IndicatorProxOracle,
    cfp_distance,
    cfp_oracles,
    estimate_kappa,
    load_cfp_instance,
    mean_sq_set_distance,
    project_set,
    run_rap,
    save_cfp_instance,
    set_distance,
)
from .proximal_gradient import (
    PGConfig,
    full_gradient_lipschitz,
    pg_step,
    prox_l1_composite,
    reference_solution,
    run_pg,
)
from .rng import GENERATOR_SCHEME, draw_index, draw_indices, make_rng
from .sparse_representation import (
    SRProblem,
    generate_sr_instance,
    load_sr_instance,
    save_sr_instance,
    sr_constants,
    sr_grad,
    sr_h_value,
    sr_objective,
    sr_oracles,
    sr_prox,
    sr_prox_residual,
    sr_subgrad,
    sr_value,
    zero_mean_subgradient_sigma,
)

__version__ = "0.1.0"
