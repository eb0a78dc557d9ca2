"""Expert demonstration generation, persistence, visitation statistics, and
the state-feature maps shared by all reward-inference methods.

A trajectory records the action steps (t, state, action) for t = 0..len-1
plus the state the final action arrived at. The final arrival matters: both
the visitation statistics and the reward targets live on arrived-at states
s_1..s_T. Early-terminated episodes arrive at the terminal state, which is
never recorded (and is excluded from visitation counts).

File format: UTF-8, LF. First line a JSON header
{"version": 1, "config": {...}, "seed": ..., "count": ...}; then one line per
trajectory, a JSON array of [t, state_index, action_index] entries, where a
completed episode carries one trailing [t, state_index, null] entry for the
final arrived state (an early-terminated episode has integer actions on every
entry). Loading is fail-closed: truncated or malformed files raise before any
partial result escapes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .environment import (
    MdpConfig,
    TransitionModel,
    config_fingerprint,
    config_from_dict,
    config_to_dict,
    num_states,
)
from .errors import DemoCompatibilityError, DemoFormatError
from .numerics import RngStream, as_generator
from .solver import SoftSolution, _check_policy


@dataclass(frozen=True)
class Trajectory:
    """steps: ((t, state_index, action_index), ...) for the action steps;
    final_state: index of the state the last action arrived at, or None when
    that arrival was the terminal state (terminated_early is then True)."""

    steps: tuple
    final_state: int | None
    terminated_early: bool

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class DemoSet:
    trajectories: tuple
    config: MdpConfig
    config_fingerprint: str
    seed: int

    def __len__(self) -> int:
        return len(self.trajectories)


def generate_demos(
    config: MdpConfig,
    transition: TransitionModel,
    solution: SoftSolution,
    count: int,
    rng,
) -> DemoSet:
    """Sample `count` episodes: initial state from P0, actions from the
    per-stage soft policy, dynamics per the transition model's trader draws.
    Episodes stop on terminal arrival or after T steps. Bitwise deterministic
    for a given stream."""
    if count < 1:
        raise ValueError("generate_demos: count must be >= 1")
    policy = _check_policy(solution.policy, transition, config)
    gen = as_generator(rng)
    horizon = config.horizon
    term = transition.terminal_index
    cum_policy = np.cumsum(policy, axis=2)
    a_count = transition.num_actions

    states = gen.choice(
        transition.num_states, size=count, p=transition.initial_distribution
    )
    state_hist = np.empty((horizon + 1, count), dtype=np.int64)
    action_hist = np.empty((horizon, count), dtype=np.int64)
    state_hist[0] = states
    for t in range(horizon):
        u = gen.random(count)
        actions = np.minimum(
            (cum_policy[t][states] < u[:, None]).sum(axis=1), a_count - 1
        )
        draws = gen.random((count, transition.trader_bid_probs.shape[1]))
        k = (draws < transition.trader_bid_probs[states]).sum(axis=1)
        states = transition.next_state_table[states, actions, k]
        action_hist[t] = actions
        state_hist[t + 1] = states

    trajectories = []
    for ep in range(count):
        steps = []
        final_state: int | None = None
        terminated = False
        for t in range(horizon):
            steps.append((t, int(state_hist[t, ep]), int(action_hist[t, ep])))
            arrived = int(state_hist[t + 1, ep])
            if arrived == term:
                terminated = True
                break
        if not terminated:
            final_state = int(state_hist[horizon, ep])
        trajectories.append(
            Trajectory(steps=tuple(steps), final_state=final_state, terminated_early=terminated)
        )

    seed = rng.master_seed if isinstance(rng, RngStream) else 0
    return DemoSet(
        trajectories=tuple(trajectories),
        config=config,
        config_fingerprint=config_fingerprint(config),
        seed=seed,
    )


def visitation_counts(demos: DemoSet, num_states_total: int, discounted: bool = True) -> np.ndarray:
    """Counts of arrived-at states s_1..s_len across all trajectories,
    weighted by gamma^t (arrival stage t) to align with the discounted
    likelihood; terminal arrivals are excluded. discounted=False gives raw
    counts."""
    gamma = demos.config.discount
    out = np.zeros(num_states_total)
    for traj in demos.trajectories:
        for t, state, _ in traj.steps:
            if not (0 <= state < num_states_total):
                raise DemoFormatError(f"state index {state} out of range")
            if t >= 1:
                out[state] += gamma**t if discounted else 1.0
        if traj.final_state is not None:
            if not (0 <= traj.final_state < num_states_total):
                raise DemoFormatError(f"state index {traj.final_state} out of range")
            out[traj.final_state] += gamma ** len(traj.steps) if discounted else 1.0
    return out


@dataclass(frozen=True)
class FeatureMap:
    """Per-state feature rows; the terminal row is all-zero so any linear or
    learned function of the features vanishes there."""

    matrix: np.ndarray
    m: int
    name: str


FEATURE_MAP_NAMES = ("normalized", "raw", "quadratic")


def feature_map(config: MdpConfig, name: str = "normalized") -> FeatureMap:
    """Feature rows per state.

    normalized (default): [v_b/N, v_a/N, i/I_max, 1]
    raw:                  [v_b, v_a, i, 1]
    quadratic:            normalized plus squared volume/inventory terms
    """
    from .environment import enumerate_states

    if name not in FEATURE_MAP_NAMES:
        raise ValueError(f"feature_map: unknown map name {name!r}")
    n = config.num_traders
    imax = config.max_inventory
    rows = []
    for s in enumerate_states(config):
        b, a, i = s.bid_volume / n, s.ask_volume / n, s.inventory / imax
        if name == "normalized":
            rows.append([b, a, i, 1.0])
        elif name == "raw":
            rows.append([float(s.bid_volume), float(s.ask_volume), float(s.inventory), 1.0])
        else:
            rows.append([b, a, i, b * b, a * a, i * i, 1.0])
    rows.append([0.0] * len(rows[0]))  # terminal
    matrix = np.asarray(rows)
    return FeatureMap(matrix=matrix, m=matrix.shape[1], name=name)


def _trajectory_to_record(traj: Trajectory) -> list:
    record = [[t, s, a] for t, s, a in traj.steps]
    if traj.final_state is not None:
        record.append([len(traj.steps), traj.final_state, None])
    return record


def _trajectory_from_record(record, config: MdpConfig, line_no: int) -> Trajectory:
    if not isinstance(record, list) or not record:
        raise DemoFormatError(f"line {line_no}: trajectory must be a nonempty JSON array")
    horizon = config.horizon
    grid = num_states(config) - 1
    from .environment import num_actions

    a_count = num_actions(config)
    steps = []
    final_state: int | None = None
    for pos, entry in enumerate(record):
        if not (isinstance(entry, list) and len(entry) == 3):
            raise DemoFormatError(f"line {line_no}: entry {pos} is not a [t, state, action] triple")
        t, state, action = entry
        if not isinstance(t, int) or t != pos:
            raise DemoFormatError(f"line {line_no}: stages must be consecutive from 0")
        if not isinstance(state, int) or not (0 <= state < grid):
            raise DemoFormatError(f"line {line_no}: state index {state!r} out of range")
        if action is None:
            if pos != len(record) - 1:
                raise DemoFormatError(f"line {line_no}: arrival entry must be last")
            final_state = state
        else:
            if not isinstance(action, int) or not (0 <= action < a_count):
                raise DemoFormatError(f"line {line_no}: action index {action!r} out of range")
            if t >= horizon:
                raise DemoFormatError(f"line {line_no}: stage {t} exceeds horizon {horizon}")
            steps.append((t, state, action))
    if not steps:
        raise DemoFormatError(f"line {line_no}: trajectory has no action steps")
    if final_state is None and len(steps) > horizon:
        raise DemoFormatError(f"line {line_no}: more steps than the horizon allows")
    return Trajectory(
        steps=tuple(steps),
        final_state=final_state,
        terminated_early=final_state is None,
    )


def save_demos(demos: DemoSet, path) -> None:
    header = {
        "version": 1,
        "config": config_to_dict(demos.config),
        "seed": demos.seed,
        "count": len(demos.trajectories),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        for traj in demos.trajectories:
            fh.write(json.dumps(_trajectory_to_record(traj)) + "\n")
    os.replace(tmp, path)


def load_demos(path, expected_config: MdpConfig | None = None) -> DemoSet:
    """Load a demo file, verifying structure and (when expected_config is
    given) the config fingerprint. Truncated or malformed input raises
    DemoFormatError with no partial result."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DemoFormatError("empty demo file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DemoFormatError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("version") != 1:
        raise DemoFormatError("unsupported or missing demo file version")
    for key in ("config", "seed", "count"):
        if key not in header:
            raise DemoFormatError(f"header missing {key!r}")
    try:
        config = config_from_dict(header["config"])
    except ValueError as exc:
        raise DemoFormatError(f"header config invalid: {exc}") from exc
    count = header["count"]
    if not isinstance(count, int) or count < 0:
        raise DemoFormatError("header count must be a non-negative integer")
    body = lines[1:]
    if len(body) != count:
        raise DemoFormatError(
            f"truncated or padded demo file: header says {count} trajectories, found {len(body)}"
        )
    trajectories = []
    for idx, line in enumerate(body):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DemoFormatError(f"line {idx + 2}: invalid JSON: {exc}") from exc
        trajectories.append(_trajectory_from_record(record, config, idx + 2))
    fingerprint = config_fingerprint(config)
    if expected_config is not None and fingerprint != config_fingerprint(expected_config):
        raise DemoCompatibilityError(
            "demo file was generated under a different environment configuration"
        )
    return DemoSet(
        trajectories=tuple(trajectories),
        config=config,
        config_fingerprint=fingerprint,
        seed=header["seed"],
    )
