"""Forward RL under maximum causal entropy, and the Expected Value
Difference metric.

Conventions, shared with the rest of the package:

* Finite horizon T. The backward recursion starts from V_T = 0 and uses
  Q_t(s,a) = sum_s' p(s'|s,a) (r(s') + gamma V_{t+1}(s')): reward is a
  function of the arrived-at state.
* The absorbing terminal state is an ordinary state to the solver (full
  action set, self-loop, its reward entry used as given; produced reward
  vectors pin it to 0). This keeps the soft policy exactly uniform under a
  zero reward and exactly invariant under constant shifts of the whole
  reward vector.
* Returns earn reward on arrived states s_1..s_T with discount gamma^t, t
  starting at 1; the initial state's reward is not earned by an action.
  Episodes absorbed at terminal earn zero for the remaining stages because
  the terminal reward entry is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import MdpConfig, TransitionModel
from .numerics import as_generator, log_sum_exp


@dataclass(frozen=True)
class SoftSolution:
    """Per-stage soft Q/V tables and the induced stochastic policy.

    soft_q and policy have shape (T, S, A); soft_v has shape (T+1, S) with
    the final row identically zero (the V_T boundary).
    """

    soft_q: np.ndarray
    soft_v: np.ndarray
    policy: np.ndarray


def _check_reward(reward, transition: TransitionModel) -> np.ndarray:
    r = np.asarray(reward, dtype=float)
    if r.shape != (transition.num_states,):
        raise ValueError(
            f"reward must have one entry per state ({transition.num_states}), got shape {r.shape}"
        )
    if not np.isfinite(r).all():
        raise ValueError("reward must be finite")
    return r


def soft_value_iteration(
    transition: TransitionModel, reward, config: MdpConfig
) -> SoftSolution:
    """Backward soft Bellman recursion; V_t = log sum exp_a Q_t, and the
    policy is the per-stage softmax of Q."""
    r = _check_reward(reward, transition)
    horizon = config.horizon
    s, a = transition.num_states, transition.num_actions
    flat = transition.tensor.reshape(s * a, s)

    soft_q = np.empty((horizon, s, a))
    soft_v = np.zeros((horizon + 1, s))
    policy = np.empty((horizon, s, a))
    for t in range(horizon - 1, -1, -1):
        q = (flat @ (r + config.discount * soft_v[t + 1])).reshape(s, a)
        v = log_sum_exp(q, axis=1)
        soft_q[t] = q
        soft_v[t] = v
        policy[t] = np.exp(q - v[:, None])
    return SoftSolution(soft_q=soft_q, soft_v=soft_v, policy=policy)


@dataclass(frozen=True)
class OccupancyMeasure:
    """state_dist[t] is d_t(s) for t = 0..T; state_action_dist[t] is
    d_t(s) * pi_t(a|s) for t = 0..T-1."""

    state_dist: np.ndarray
    state_action_dist: np.ndarray


def _check_policy(policy, transition: TransitionModel, config: MdpConfig) -> np.ndarray:
    p = np.asarray(policy, dtype=float)
    expected = (config.horizon, transition.num_states, transition.num_actions)
    if p.shape != expected:
        raise ValueError(f"policy must have shape {expected}, got {p.shape}")
    return p


def occupancy(transition: TransitionModel, solution) -> OccupancyMeasure:
    """Forward pass d_0 = P0, d_{t+1} = sum_{s,a} d_t(s) pi_t(a|s) p(s'|s,a).

    `solution` is a SoftSolution or a bare per-stage policy array (T, S, A).
    """
    policy = solution.policy if isinstance(solution, SoftSolution) else np.asarray(solution)
    s, a = transition.num_states, transition.num_actions
    horizon = policy.shape[0]
    flat = transition.tensor.reshape(s * a, s)

    state_dist = np.empty((horizon + 1, s))
    state_action = np.empty((horizon, s, a))
    state_dist[0] = transition.initial_distribution
    for t in range(horizon):
        joint = state_dist[t][:, None] * policy[t]
        state_action[t] = joint
        state_dist[t + 1] = joint.reshape(s * a) @ flat
    return OccupancyMeasure(state_dist=state_dist, state_action_dist=state_action)


def expected_return(
    transition: TransitionModel, policy, true_reward, config: MdpConfig
) -> float:
    """Exact expected discounted return of a per-stage policy: reward of each
    arrived-at state s_t, t = 1..T, weighted by gamma^t."""
    r = _check_reward(true_reward, transition)
    p = _check_policy(policy, transition, config)
    occ = occupancy(transition, p)
    total = 0.0
    for t in range(1, config.horizon + 1):
        total += config.discount**t * float(occ.state_dist[t] @ r)
    return total


def uniform_policy(transition: TransitionModel, config: MdpConfig) -> np.ndarray:
    s, a = transition.num_states, transition.num_actions
    return np.full((config.horizon, s, a), 1.0 / a)


def greedy_policy(solution: SoftSolution) -> np.ndarray:
    """Deterministic argmax policy of the soft Q tables (lowest action index
    wins ties); exposed for EVD sensitivity checks."""
    horizon, s, a = solution.soft_q.shape
    policy = np.zeros((horizon, s, a))
    best = solution.soft_q.argmax(axis=2)
    for t in range(horizon):
        policy[t, np.arange(s), best[t]] = 1.0
    return policy


def expected_value_difference(
    true_reward,
    inferred_reward,
    transition: TransitionModel,
    config: MdpConfig,
    policy_mode: str = "soft",
) -> float:
    """EVD: expected return of the soft-optimal policy for the true reward
    minus that of the policy induced by the inferred reward, both evaluated
    under the true reward. policy_mode selects how the inferred policy is
    read off its soft solution: "soft" (default) or "greedy"."""
    if policy_mode not in ("soft", "greedy"):
        raise ValueError(f"unknown policy_mode {policy_mode!r}")
    r_true = _check_reward(true_reward, transition)
    expert = soft_value_iteration(transition, r_true, config)
    inferred = soft_value_iteration(transition, inferred_reward, config)
    pi_hat = inferred.policy if policy_mode == "soft" else greedy_policy(inferred)
    return expected_return(transition, expert.policy, r_true, config) - expected_return(
        transition, pi_hat, r_true, config
    )


def uniform_policy_gap(transition: TransitionModel, config: MdpConfig, true_reward) -> float:
    """EVD of the uniform-random policy against the expert; the baseline that
    normalizes relative recovery thresholds."""
    r = _check_reward(true_reward, transition)
    expert = soft_value_iteration(transition, r, config)
    return expected_return(transition, expert.policy, r, config) - expected_return(
        transition, uniform_policy(transition, config), r, config
    )


def rollout_returns(
    transition: TransitionModel,
    policy,
    reward,
    config: MdpConfig,
    count: int,
    rng,
) -> np.ndarray:
    """Sample `count` episodes under a per-stage policy and return each
    episode's discounted return (reward of arrived states, gamma^t, t from 1).

    Vectorized across episodes with a fixed draw order, so results are
    deterministic for a given stream. Absorption needs no special casing:
    the terminal row self-loops and its reward entry is zero.
    """
    if count < 1:
        raise ValueError("rollout_returns: count must be >= 1")
    r = _check_reward(reward, transition)
    p = _check_policy(policy, transition, config)
    gen = as_generator(rng)
    cum_policy = np.cumsum(p, axis=2)
    a_count = transition.num_actions

    states = gen.choice(
        transition.num_states, size=count, p=transition.initial_distribution
    )
    returns = np.zeros(count)
    for t in range(config.horizon):
        u = gen.random(count)
        actions = np.minimum(
            (cum_policy[t][states] < u[:, None]).sum(axis=1), a_count - 1
        )
        draws = gen.random((count, transition.trader_bid_probs.shape[1]))
        k = (draws < transition.trader_bid_probs[states]).sum(axis=1)
        states = transition.next_state_table[states, actions, k]
        returns += config.discount ** (t + 1) * r[states]
    return returns


def monte_carlo_evd(
    true_reward,
    inferred_reward,
    transition: TransitionModel,
    config: MdpConfig,
    num_trajectories: int,
    rng,
):
    """Monte-Carlo EVD estimate: difference of mean discounted returns over
    independent rollouts of the two soft policies, with its pooled standard
    error. Returns (estimate, standard_error)."""
    if num_trajectories < 1:
        raise ValueError("monte_carlo_evd: num_trajectories must be >= 1")
    from .numerics import RngStream

    r_true = _check_reward(true_reward, transition)
    expert = soft_value_iteration(transition, r_true, config)
    inferred = soft_value_iteration(transition, inferred_reward, config)
    if isinstance(rng, RngStream):
        rng_expert, rng_inferred = rng.substream(0), rng.substream(1)
    else:
        rng_expert = rng_inferred = rng
    g_expert = rollout_returns(
        transition, expert.policy, r_true, config, num_trajectories, rng_expert
    )
    g_inferred = rollout_returns(
        transition, inferred.policy, r_true, config, num_trajectories, rng_inferred
    )
    estimate = float(g_expert.mean() - g_inferred.mean())
    pooled = float(
        np.sqrt(
            g_expert.var(ddof=1) / num_trajectories
            + g_inferred.var(ddof=1) / num_trajectories
        )
    )
    return estimate, pooled
