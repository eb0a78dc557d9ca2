"""Tour of the one-level order-book environment.

The market has N identical trading slots on each side of the book. A state is
(bid volume, ask volume, inventory); the controlled agent chooses how many
resting bids and asks to take. The N background traders each place a bid with
a logistic probability of the book imbalance, so the number of bids placed
follows a Poisson-binomial distribution and every transition probability is
exact.
"""

import numpy as np

import lob_irl as L

config = L.MdpConfig()
print("configuration:", config)
print("fingerprint:", L.config_fingerprint(config))

# state and action enumeration: inventory varies slowest, ask volume fastest,
# and the very last index is the absorbing out-of-inventory state
states = L.enumerate_states(config)
actions = L.enumerate_actions(config)
print(f"\n{len(states)} states + terminal, {len(actions)} actions")
print("first three states:", states[:3])
print("actions:", actions)

state = L.State(bid_volume=2, ask_volume=1, inventory=0)
idx = L.state_index(config, state)
print(f"\nstate {state} has index {idx}")
assert L.state_from_index(config, idx) == state

# each background trader bids with probability sigma((v_b - v_a) / tau)
for temp in config.temperatures:
    print(f"trader with tau={temp}: bid probability {L.trader_bid_probability(state, temp):.4f}")

belief = L.belief_distribution(state, config)
print("\nbid-count distribution at", state)
for k, p in enumerate(belief.bid_count_pmf):
    print(f"  k={k}: {p:.6f}")
print("sum:", belief.bid_count_pmf.sum())

# the full kernel: rows are exact probability vectors
transition = L.build_transition_model(config)
print("\ntransition tensor:", transition.tensor.shape)
print("worst row-sum deviation:", np.abs(transition.tensor.sum(axis=2) - 1.0).max())

# taking (2, 0) from (2, 1, 0): matched bids move inventory up
action_idx = actions.index(L.Action(2, 0))
row = transition.tensor[idx, action_idx]
support = np.nonzero(row)[0]
print(f"\nnext states after taking (2, 0) from {state}:")
for s in support:
    print(f"  {L.state_from_index(config, int(s))}: {row[s]:.6f}")

# two reward families over arrived-at states
linear = L.reward_vector(config)
exponential = L.reward_vector(L.MdpConfig(reward=L.RewardSpec(kind="exponential")))
print("\nlinear reward range:", linear.min(), "to", linear.max())
print("exponential reward range:", round(exponential.min(), 4), "to", round(exponential.max(), 4))
print("terminal reward entries:", linear[-1], exponential[-1])
