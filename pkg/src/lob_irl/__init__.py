"""Inverse reinforcement learning on a one-level limit-order-book MDP.

The package provides the exact finite-horizon environment (Poisson-binomial
order flow, inventory-capped execution), a soft-optimal expert and
demonstration sampler, three reward-inference methods (linear maximum causal
entropy, GP-based IRL with a deterministic training conditional, and a
two-step Bayesian neural network), and an expected-value-difference benchmark
harness with a CLI.
"""

from .benchmark import (
    CSV_HEADER,
    ExperimentConfig,
    ResultRecord,
    cell_stream_id,
    grid_cells,
    load_experiment_config,
    run_benchmark,
    run_cell,
    run_grid,
)
from .bnn import (
    BnnArchitecture,
    BnnIrlResult,
    BnnSettings,
    ElboEstimate,
    RewardDataset,
    VariationalPosterior,
    bnn_irl,
    bnn_irl_details,
    elbo_estimate,
    elbo_gradient,
    fit_bnn,
    forward,
    kl_diagonal_gaussians,
    predict_reward_mean,
)
from .demonstrations import (
    DemoSet,
    FeatureMap,
    Trajectory,
    feature_map,
    generate_demos,
    load_demos,
    save_demos,
    visitation_counts,
)
from .environment import (
    Action,
    BeliefDistribution,
    MdpConfig,
    RewardSpec,
    State,
    TransitionModel,
    belief_distribution,
    build_transition_model,
    config_fingerprint,
    config_from_dict,
    config_to_dict,
    enumerate_actions,
    enumerate_states,
    num_actions,
    num_states,
    poisson_binomial_pmf,
    reward_vector,
    sample_step,
    state_from_index,
    state_index,
    state_reward,
    trader_bid_probability,
)
from .errors import (
    ConfigParseError,
    ConfigValidationError,
    DemoCompatibilityError,
    DemoFormatError,
    NumericalError,
)
from .gpirl import (
    GpirlModel,
    GpirlSettings,
    KernelHyperparams,
    dtc_extrapolate,
    fit_gpirl,
    gpirl_objective,
    inducing_state_indices,
    kernel_matrix,
)
from .maxent import (
    FitDiagnostics,
    LinearRewardModel,
    OptimizerSettings,
    TabularRewardModel,
    fit_linear,
    fit_tabular,
    maxent_gradient_linear,
    maxent_gradient_tabular,
    maxent_log_likelihood,
    reward_from_linear,
)
from .numerics import (
    AdamState,
    RngStream,
    adam_step,
    as_generator,
    check_gradient,
    cholesky_factor,
    cholesky_solve,
    log_sum_exp,
)
from .serialization import (
    MODEL_KINDS,
    bnn_payload,
    gpirl_payload,
    linear_payload,
    load_model,
    reward_from_document,
    save_model,
)
from .solver import (
    OccupancyMeasure,
    SoftSolution,
    expected_return,
    expected_value_difference,
    greedy_policy,
    monte_carlo_evd,
    occupancy,
    rollout_returns,
    soft_value_iteration,
    uniform_policy,
    uniform_policy_gap,
)

__version__ = "0.1.0"
