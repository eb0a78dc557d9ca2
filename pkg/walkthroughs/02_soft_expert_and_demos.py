"""Soft-optimal expert and demonstration files.

The expert follows the maximum-causal-entropy policy: a finite-horizon
backward pass where V = log-sum-exp over soft action values. Demonstrations
are sampled episodes of (stage, state, action) steps; episodes stop early if
the inventory bound is breached.
"""

import numpy as np

import lob_irl as L

config = L.MdpConfig()
transition = L.build_transition_model(config)
reward = L.reward_vector(config)

solution = L.soft_value_iteration(transition, reward, config)
print("policy shape (stage, state, action):", solution.policy.shape)
print("rows sum to one:", np.allclose(solution.policy.sum(axis=2), 1.0))

# sanity: with zero reward the soft policy is exactly uniform
flat = L.soft_value_iteration(transition, np.zeros(transition.num_states), config)
print("zero-reward max deviation from uniform:",
      np.abs(flat.policy - 1.0 / transition.num_actions).max())

# occupancy and the evaluation scale used throughout the benchmark
occ = L.occupancy(transition, solution)
print("\nstage-0 state distribution is the initial distribution:",
      np.allclose(occ.state_dist[0], transition.initial_distribution))
expert_return = L.expected_return(transition, solution.policy, reward, config)
gap = L.uniform_policy_gap(transition, config, reward)
print(f"expert expected return {expert_return:.4f}, uniform-policy gap {gap:.4f}")

# sample demonstrations; the stream makes the set reproducible
demos = L.generate_demos(config, transition, solution, 500, L.RngStream(11))
lengths = [len(t) for t in demos.trajectories]
ended_early = sum(t.terminated_early for t in demos.trajectories)
print(f"\n{len(demos)} episodes, mean length {np.mean(lengths):.2f}, "
      f"{ended_early} terminated early")

counts = L.visitation_counts(demos, transition.num_states, discounted=True)
top = np.argsort(counts)[::-1][:5]
print("most visited states (discounted):")
for s in top:
    print(f"  {L.state_from_index(config, int(s))}: {counts[s]:.1f}")

# round trip through the on-disk format
L.save_demos(demos, "/tmp/demos_walkthrough.jsonl")
loaded = L.load_demos("/tmp/demos_walkthrough.jsonl", expected_config=config)
print("\nreloaded:", len(loaded), "episodes, fingerprint matches:",
      loaded.config_fingerprint == demos.config_fingerprint)

# Monte-Carlo check of the exact return computation
returns = L.rollout_returns(transition, solution.policy, reward, config, 100_000, L.RngStream(1))
se = returns.std(ddof=1) / np.sqrt(returns.size)
print(f"MC return {returns.mean():.4f} +- {se:.4f} vs exact {expert_return:.4f}")
