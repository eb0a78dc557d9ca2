"""Maximum-causal-entropy IRL on the tabular and linear reward classes.

The demo log-likelihood under the soft-optimal policy of a candidate reward is
    L(r) = sum_traj sum_t log pi_t(a_t | s_t)
         = sum_t sum_{s,a} C_t(s,a) (Q_t(s,a) - V_t(s)),
with C_t the per-stage demo step counts. The gradient is computed exactly by
an adjoint sweep through the backward recursion (not the visitation-matching
approximation, which only matches in expectation under stochastic dynamics):
walking t = 0..T-1,
    Vbar_t = -rowsum(C_t) + gamma * u_{t-1}
    Qbar_t = C_t + Vbar_t[:, None] * pi_t
    u_t    = P_flat^T vec(Qbar_t),   dL/dr += u_t.
The terminal reward entry is pinned to zero, so its gradient coordinate is
dropped. Fit routines scale the objective by 1/num_trajectories so the
stopping tolerance means the same thing at every demo count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .demonstrations import DemoSet, FeatureMap, visitation_counts
from .environment import MdpConfig, TransitionModel
from .errors import DemoFormatError, NumericalError
from .numerics import AdamState, adam_step
from .solver import soft_value_iteration


def stage_step_counts(
    demos: DemoSet, transition: TransitionModel, config: MdpConfig
) -> np.ndarray:
    """C[t, s, a] = number of demo steps taking a from s at stage t."""
    horizon = config.horizon
    s_count, a_count = transition.num_states, transition.num_actions
    stages, states, actions = [], [], []
    for traj in demos.trajectories:
        for t, state, action in traj.steps:
            if t >= horizon:
                raise DemoFormatError(f"demo stage {t} exceeds horizon {horizon}")
            if not (0 <= state < s_count) or not (0 <= action < a_count):
                raise DemoFormatError("demo state or action index out of range")
            stages.append(t)
            states.append(state)
            actions.append(action)
    counts = np.zeros((horizon, s_count, a_count))
    if stages:
        np.add.at(counts, (np.array(stages), np.array(states), np.array(actions)), 1.0)
    return counts


def _likelihood_from_counts(
    reward, counts: np.ndarray, transition: TransitionModel, config: MdpConfig
) -> float:
    sol = soft_value_iteration(transition, reward, config)
    return float(
        np.sum(counts * (sol.soft_q - sol.soft_v[: config.horizon, :, None]))
    )


def _likelihood_and_gradient(
    reward, counts: np.ndarray, transition: TransitionModel, config: MdpConfig
):
    """Exact (L, dL/dr); the terminal coordinate of dL/dr is zeroed since the
    terminal reward is a pinned constant, not a parameter."""
    sol = soft_value_iteration(transition, reward, config)
    s, a = transition.num_states, transition.num_actions
    flat = transition.tensor.reshape(s * a, s)
    ll = float(np.sum(counts * (sol.soft_q - sol.soft_v[: config.horizon, :, None])))

    grad = np.zeros(s)
    carry = np.zeros(s)  # gamma * u from the previous (earlier) stage
    for t in range(config.horizon):
        v_bar = -counts[t].sum(axis=1) + carry
        q_bar = counts[t] + v_bar[:, None] * sol.policy[t]
        u = flat.T @ q_bar.reshape(s * a)
        grad += u
        carry = config.discount * u
    grad[transition.terminal_index] = 0.0
    return ll, grad


def maxent_log_likelihood(
    reward, demos: DemoSet, transition: TransitionModel, config: MdpConfig
) -> float:
    """Total demo log-likelihood (sum over steps, not averaged)."""
    counts = stage_step_counts(demos, transition, config)
    return _likelihood_from_counts(reward, counts, transition, config)


def maxent_gradient_tabular(
    reward, demos: DemoSet, transition: TransitionModel, config: MdpConfig
) -> np.ndarray:
    """Exact gradient of maxent_log_likelihood in the tabular reward; entry
    per state, terminal coordinate zero."""
    counts = stage_step_counts(demos, transition, config)
    return _likelihood_and_gradient(reward, counts, transition, config)[1]


def maxent_gradient_linear(
    weights, demos: DemoSet, features: FeatureMap, transition: TransitionModel, config: MdpConfig
) -> np.ndarray:
    """Chain rule through r = Phi w: Phi^T dL/dr."""
    w = np.asarray(weights, dtype=float)
    reward = features.matrix @ w
    counts = stage_step_counts(demos, transition, config)
    _, grad_r = _likelihood_and_gradient(reward, counts, transition, config)
    return features.matrix.T @ grad_r


@dataclass(frozen=True)
class OptimizerSettings:
    learning_rate: float = 1e-2
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-4


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    converged: bool
    final_objective: float
    final_gradient_norm: float


@dataclass(frozen=True)
class TabularRewardModel:
    """Per-state reward estimates for the non-terminal states, in enumeration
    order; visited_mask flags states that appear as arrivals in the demos."""

    rewards: np.ndarray
    visited_mask: np.ndarray
    diagnostics: FitDiagnostics

    def full(self) -> np.ndarray:
        return np.append(self.rewards, 0.0)


@dataclass(frozen=True)
class LinearRewardModel:
    weights: np.ndarray
    feature_name: str
    diagnostics: FitDiagnostics


def reward_from_linear(model: LinearRewardModel, features: FeatureMap) -> np.ndarray:
    if features.name != model.feature_name:
        raise ValueError(
            f"model was fit on feature map {model.feature_name!r}, got {features.name!r}"
        )
    if features.m != model.weights.shape[0]:
        raise ValueError("feature dimension does not match model weights")
    return features.matrix @ model.weights


def _ascend(objective_and_gradient, x0: np.ndarray, settings: OptimizerSettings):
    """Adam ascent with monotone acceptance: a proposal that lowers the
    objective is rejected, the learning rate halves, and the attempt still
    counts toward the iteration cap. Returns (x, diagnostics)."""
    x = x0.copy()
    state = AdamState(learning_rate=settings.learning_rate)
    obj, grad = objective_and_gradient(x)
    if not np.isfinite(obj):
        raise NumericalError("objective non-finite at the initial point")
    converged = False
    iterations = 0
    while iterations < settings.max_iterations:
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gnorm < settings.gradient_tolerance:
            converged = True
            break
        new_state, new_x = adam_step(state, x, -grad)
        iterations += 1
        new_obj, new_grad = objective_and_gradient(new_x)
        if not np.isfinite(new_obj):
            raise NumericalError(
                f"objective became non-finite at iteration {iterations} "
                f"(last finite value {obj:.6g})"
            )
        if new_obj < obj:
            state = replace(state, learning_rate=state.learning_rate / 2.0)
            continue
        x, state, obj, grad = new_x, new_state, new_obj, new_grad
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    diag = FitDiagnostics(
        iterations=iterations,
        converged=converged or gnorm < settings.gradient_tolerance,
        final_objective=obj,
        final_gradient_norm=gnorm,
    )
    return x, diag


def fit_tabular(
    demos: DemoSet,
    transition: TransitionModel,
    config: MdpConfig,
    settings: OptimizerSettings | None = None,
) -> TabularRewardModel:
    """Maximize the per-trajectory-averaged likelihood over the tabular reward
    (terminal pinned at zero), from a zero initial point."""
    settings = settings or OptimizerSettings()
    counts = stage_step_counts(demos, transition, config)
    scale = 1.0 / max(len(demos), 1)
    term = transition.terminal_index

    def objective_and_gradient(x):
        full = np.append(x, 0.0)
        ll, grad = _likelihood_and_gradient(full, counts, transition, config)
        return ll * scale, grad[:term] * scale

    x0 = np.zeros(transition.num_states - 1)
    x, diag = _ascend(objective_and_gradient, x0, settings)
    visits = visitation_counts(demos, transition.num_states, discounted=False)
    return TabularRewardModel(
        rewards=x, visited_mask=visits[:term] > 0, diagnostics=diag
    )


def fit_linear(
    demos: DemoSet,
    features: FeatureMap,
    transition: TransitionModel,
    config: MdpConfig,
    settings: OptimizerSettings | None = None,
) -> LinearRewardModel:
    settings = settings or OptimizerSettings()
    counts = stage_step_counts(demos, transition, config)
    scale = 1.0 / max(len(demos), 1)
    if features.matrix.shape[0] != transition.num_states:
        raise ValueError("feature map does not cover every state")

    def objective_and_gradient(w):
        reward = features.matrix @ w
        ll, grad_r = _likelihood_and_gradient(reward, counts, transition, config)
        return ll * scale, (features.matrix.T @ grad_r) * scale

    w0 = np.zeros(features.m)
    w, diag = _ascend(objective_and_gradient, w0, settings)
    return LinearRewardModel(weights=w, feature_name=features.name, diagnostics=diag)
