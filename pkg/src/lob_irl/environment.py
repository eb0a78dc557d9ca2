"""One-level limit-order-book MDP.

The book holds v_b resting orders at the best bid and v_a at the best ask,
both in 0..N. Each step, every one of the N trading agents places exactly one
order, bid with probability logistic((v_b - v_a)/tau_n) given the current
state. The expert's action (bid_take, ask_take), bid_take + ask_take <= N,
executes against that intermediate placement: matched bids are expert buys
(+1 inventory each), matched asks are expert sells (-1 each). Remaining
orders become the next state's volumes. If |inventory| ever exceeds
max_inventory the episode is absorbed into a terminal state with zero reward.

Because the trader placement is a sum of independent non-identical
Bernoullis, the number of intermediate bids k follows a Poisson binomial
distribution and the one-step transition kernel is exactly computable.

States are enumerated lexicographically, inventory ascending outermost, then
bid volume, then ask volume; index 0 is (v_b=0, v_a=0, i=-max_inventory) and
the terminal state takes the final index. The grid deliberately includes
(v_b, v_a) pairs with v_b + v_a > N: they can occur as initial states under
the uniform initial distribution but are never reached by the dynamics.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_generator

REWARD_KINDS = ("linear", "exponential")


@dataclass(frozen=True)
class RewardSpec:
    """Reward as a function of the arrived-at state.

    linear:      r(s) = N - v_b - v_a       (the expert's hit count)
    exponential: r(s) = 1 - exp(-alpha * (N - v_b - v_a - beta * |i|))
    alpha and beta are ignored for the linear kind. Terminal reward is 0.
    """

    kind: str = "linear"
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.kind not in REWARD_KINDS:
            raise ValueError(f"RewardSpec: unknown kind {self.kind!r}")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("RewardSpec: alpha and beta must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("RewardSpec: alpha and beta must be >= 0")
        if self.kind == "exponential" and self.alpha == 0:
            raise ValueError("RewardSpec: exponential kind requires alpha > 0")


@dataclass(frozen=True)
class MdpConfig:
    num_traders: int = 3
    max_inventory: int = 5
    horizon: int = 5
    discount: float = 0.9
    temperatures: tuple[float, ...] = (0.1, 0.5, 1.0)
    reward: RewardSpec = field(default_factory=RewardSpec)

    def __post_init__(self):
        if self.num_traders < 1:
            raise ValueError("MdpConfig: num_traders must be >= 1")
        if self.max_inventory < 1:
            raise ValueError("MdpConfig: max_inventory must be >= 1")
        if self.horizon < 1:
            raise ValueError("MdpConfig: horizon must be >= 1")
        if not (0 <= self.discount <= 1):
            raise ValueError("MdpConfig: discount must be in [0, 1]")
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        if len(self.temperatures) != self.num_traders:
            raise ValueError("MdpConfig: temperatures must have one entry per trader")
        if any(t <= 0 or not math.isfinite(t) for t in self.temperatures):
            raise ValueError("MdpConfig: temperatures must be positive finite")


@dataclass(frozen=True)
class State:
    bid_volume: int
    ask_volume: int
    inventory: int


@dataclass(frozen=True)
class Action:
    bid_take: int
    ask_take: int


def num_grid_states(config: MdpConfig) -> int:
    side = config.num_traders + 1
    return side * side * (2 * config.max_inventory + 1)


def num_states(config: MdpConfig) -> int:
    """Grid states plus the absorbing terminal state."""
    return num_grid_states(config) + 1


def terminal_index(config: MdpConfig) -> int:
    return num_grid_states(config)


def state_index(config: MdpConfig, state: State) -> int:
    n = config.num_traders
    if not (0 <= state.bid_volume <= n and 0 <= state.ask_volume <= n):
        raise ValueError(f"state_index: volumes out of range for {state}")
    if abs(state.inventory) > config.max_inventory:
        raise ValueError(f"state_index: inventory out of range for {state}")
    side = n + 1
    return ((state.inventory + config.max_inventory) * side + state.bid_volume) * side + state.ask_volume


def state_from_index(config: MdpConfig, index: int) -> State:
    if not (0 <= index < num_grid_states(config)):
        raise ValueError(f"state_from_index: {index} is not a grid state index")
    side = config.num_traders + 1
    ask = index % side
    bid = (index // side) % side
    inv = index // (side * side) - config.max_inventory
    return State(bid_volume=bid, ask_volume=ask, inventory=inv)


def enumerate_states(config: MdpConfig) -> list[State]:
    """All grid states in index order (the terminal state has no tuple; it
    occupies the final index, num_states - 1)."""
    n = config.num_traders
    return [
        State(bid_volume=b, ask_volume=a, inventory=i)
        for i in range(-config.max_inventory, config.max_inventory + 1)
        for b in range(n + 1)
        for a in range(n + 1)
    ]


def enumerate_actions(config: MdpConfig) -> list[Action]:
    """All (bid_take, ask_take) with bid_take + ask_take <= N, lexicographic,
    (0, 0) first."""
    n = config.num_traders
    return [
        Action(bid_take=b, ask_take=a)
        for b in range(n + 1)
        for a in range(n + 1 - b)
    ]


def num_actions(config: MdpConfig) -> int:
    n = config.num_traders
    return (n + 1) * (n + 2) // 2


def validate_action(config: MdpConfig, action: Action) -> None:
    if action.bid_take < 0 or action.ask_take < 0:
        raise ValueError(f"action {action} has negative volume")
    if action.bid_take + action.ask_take > config.num_traders:
        raise ValueError(f"action {action} exceeds total volume N={config.num_traders}")


def trader_bid_probability(state: State, temperature: float) -> float:
    """Probability that one trading agent places a bid in this state:
    logistic((v_b - v_a) / tau), computed without overflow."""
    if temperature <= 0:
        raise ValueError("trader_bid_probability: temperature must be > 0")
    x = (state.bid_volume - state.ask_volume) / temperature
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def poisson_binomial_pmf(probabilities) -> np.ndarray:
    """Exact PMF of a sum of independent Bernoulli(p_n) draws, by iterative
    convolution. O(N^2) and exact to machine precision."""
    probs = np.asarray(probabilities, dtype=float)
    if probs.ndim != 1:
        raise ValueError("poisson_binomial_pmf: expected a vector")
    if probs.size and (probs.min() < 0 or probs.max() > 1):
        raise ValueError("poisson_binomial_pmf: probabilities must lie in [0, 1]")
    pmf = np.ones(1)
    for p in probs:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


@dataclass(frozen=True)
class BeliefDistribution:
    """Distribution of the intermediate trader bid count k (asks = N - k)."""

    bid_count_pmf: np.ndarray


def belief_distribution(state: State, config: MdpConfig) -> BeliefDistribution:
    probs = [trader_bid_probability(state, tau) for tau in config.temperatures]
    return BeliefDistribution(bid_count_pmf=poisson_binomial_pmf(probs))


def apply_execution(belief_bids: int, state: State, action: Action, config: MdpConfig):
    """Execute the expert action against k intermediate trader bids.

    Returns (next_state_or_None, matched_bids, matched_asks); None denotes
    absorption into the terminal state (inventory bound violated).
    """
    n = config.num_traders
    if not (0 <= belief_bids <= n):
        raise ValueError(f"apply_execution: bid count {belief_bids} outside 0..{n}")
    validate_action(config, action)
    matched_bids = min(action.bid_take, belief_bids)
    matched_asks = min(action.ask_take, n - belief_bids)
    next_inventory = state.inventory + matched_bids - matched_asks
    if abs(next_inventory) > config.max_inventory:
        return None, matched_bids, matched_asks
    nxt = State(
        bid_volume=belief_bids - matched_bids,
        ask_volume=(n - belief_bids) - matched_asks,
        inventory=next_inventory,
    )
    return nxt, matched_bids, matched_asks


@dataclass(frozen=True)
class TransitionModel:
    """Exact one-step kernel plus the lookup tables the samplers use.

    tensor[s, a, s'] is p(s'|s, a); the terminal row is self-absorbing under
    every action. next_state_table[s, a, k] and bid_count_pmf[s, k] factor the
    same kernel through the trader bid count so rollouts can be vectorized.
    """

    num_states: int
    num_actions: int
    tensor: np.ndarray
    initial_distribution: np.ndarray
    terminal_index: int
    next_state_table: np.ndarray
    bid_count_pmf: np.ndarray
    trader_bid_probs: np.ndarray


def build_transition_model(config: MdpConfig) -> TransitionModel:
    states = enumerate_states(config)
    actions = enumerate_actions(config)
    n = config.num_traders
    s_total = num_states(config)
    a_total = len(actions)
    term = terminal_index(config)

    tensor = np.zeros((s_total, a_total, s_total))
    next_table = np.full((s_total, a_total, n + 1), term, dtype=np.int64)
    pmf_table = np.zeros((s_total, n + 1))
    trader_probs = np.zeros((s_total, n))

    for si, state in enumerate(states):
        probs = [trader_bid_probability(state, tau) for tau in config.temperatures]
        trader_probs[si] = probs
        pmf = poisson_binomial_pmf(probs)
        pmf_table[si] = pmf
        for ai, action in enumerate(actions):
            for k in range(n + 1):
                nxt, _, _ = apply_execution(k, state, action, config)
                ni = term if nxt is None else state_index(config, nxt)
                next_table[si, ai, k] = ni
                tensor[si, ai, ni] += pmf[k]

    tensor[term, :, term] = 1.0
    pmf_table[term, 0] = 1.0  # never sampled from; keeps rows normalized

    initial = np.zeros(s_total)
    initial[:term] = 1.0 / term

    return TransitionModel(
        num_states=s_total,
        num_actions=a_total,
        tensor=tensor,
        initial_distribution=initial,
        terminal_index=term,
        next_state_table=next_table,
        bid_count_pmf=pmf_table,
        trader_bid_probs=trader_probs,
    )


def state_reward(state: State, config: MdpConfig) -> float:
    """Reward earned on arriving at a grid state."""
    spec = config.reward
    hit = config.num_traders - state.bid_volume - state.ask_volume
    if spec.kind == "linear":
        return float(hit)
    return 1.0 - math.exp(-spec.alpha * (hit - spec.beta * abs(state.inventory)))


def reward_vector(config: MdpConfig) -> np.ndarray:
    """Reward per state index; the terminal entry is 0."""
    out = np.zeros(num_states(config))
    for si, state in enumerate(enumerate_states(config)):
        out[si] = state_reward(state, config)
    return out


def sample_step(state: State, action: Action, config: MdpConfig, rng):
    """Draw each trader's Bernoulli order, execute, and return
    (next_state_or_None, reward_of_arrival). rng is an RngStream or a numpy
    Generator; the next-state distribution equals the tensor row."""
    if state is None:
        raise ValueError("sample_step: called on the terminal state")
    validate_action(config, action)
    gen = as_generator(rng)
    draws = gen.random(config.num_traders)
    k = 0
    for u, tau in zip(draws, config.temperatures):
        if u < trader_bid_probability(state, tau):
            k += 1
    nxt, _, _ = apply_execution(k, state, action, config)
    reward = 0.0 if nxt is None else state_reward(nxt, config)
    return nxt, reward


def config_fingerprint(config: MdpConfig) -> str:
    """Stable hash of the MDP configuration, used to guard demo files and
    serialized models against environment mismatch."""
    return hashlib.sha256(
        json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def config_to_dict(config: MdpConfig) -> dict:
    return {
        "num_traders": config.num_traders,
        "max_inventory": config.max_inventory,
        "horizon": config.horizon,
        "discount": config.discount,
        "temperatures": list(config.temperatures),
        "reward": {
            "kind": config.reward.kind,
            "alpha": config.reward.alpha,
            "beta": config.reward.beta,
        },
    }


def config_from_dict(data: dict) -> MdpConfig:
    if not isinstance(data, dict):
        raise ValueError("config_from_dict: expected an object")
    reward_data = data.get("reward", {})
    if not isinstance(reward_data, dict):
        raise ValueError("config_from_dict: reward must be an object")
    known = {"num_traders", "max_inventory", "horizon", "discount", "temperatures", "reward"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"config_from_dict: unknown fields {sorted(unknown)}")
    reward = RewardSpec(
        kind=reward_data.get("kind", "linear"),
        alpha=reward_data.get("alpha", 0.5),
        beta=reward_data.get("beta", 0.5),
    )
    return MdpConfig(
        num_traders=data.get("num_traders", 3),
        max_inventory=data.get("max_inventory", 5),
        horizon=data.get("horizon", 5),
        discount=data.get("discount", 0.9),
        temperatures=tuple(data.get("temperatures", (0.1, 0.5, 1.0))),
        reward=reward,
    )
