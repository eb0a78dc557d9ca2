"""Benchmark grid: (method x demo_count x seed) cells, each fitting a reward
from freshly generated demos and scoring it by expected value difference.

Determinism contract: every cell derives its randomness from
RngStream(master_seed, cell_stream_id) where the cell stream id is a stable
hash of (method, reward kind, demo count, seed). Cells therefore never share
or race on RNG state, results are byte-identical (timing columns aside) for
any worker count, and a failed cell yields an error record without touching
its neighbours.

CSV schema (header is part of the interface):
    method,reward_kind,demo_count,seed,evd_exact,evd_mc,mc_stderr,fit_seconds,eval_seconds
with full-precision repr floats and empty fields for values not computed. A
JSONL mirror holds the same records plus an error field when a cell failed.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bnn import BnnSettings, bnn_irl
from .demonstrations import (
    FEATURE_MAP_NAMES,
    feature_map,
    generate_demos,
)
from .environment import (
    MdpConfig,
    build_transition_model,
    config_from_dict,
    config_fingerprint,
    config_to_dict,
    reward_vector,
)
from .errors import ConfigParseError, ConfigValidationError
from .gpirl import dtc_extrapolate, fit_gpirl
from .maxent import fit_linear, reward_from_linear
from .numerics import RngStream
from .solver import (
    expected_value_difference,
    monte_carlo_evd,
    soft_value_iteration,
    uniform_policy_gap,
)

METHOD_NAMES = ("maxent_linear", "gpirl", "bnn")
EVD_MODES = ("exact", "monte_carlo", "both")
CSV_HEADER = "method,reward_kind,demo_count,seed,evd_exact,evd_mc,mc_stderr,fit_seconds,eval_seconds"
WORKERS_ENV_VAR = "LOB_IRL_WORKERS"

DEFAULT_DEMO_COUNTS = (512, 1024, 2048, 4096, 8192, 16384)


@dataclass(frozen=True)
class ExperimentConfig:
    mdp: MdpConfig = MdpConfig()
    methods: tuple = METHOD_NAMES
    demo_counts: tuple = DEFAULT_DEMO_COUNTS
    num_seeds: int = 10
    evd_mode: str = "exact"
    mc_trajectories: int = 100000
    feature_map: str = "normalized"
    output_path: str | None = None
    master_seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ConfigValidationError("methods: must list at least one method")
        for name in self.methods:
            if name not in METHOD_NAMES:
                raise ConfigValidationError(
                    f"methods: unknown method {name!r} (choose from {METHOD_NAMES})"
                )
        if len(set(self.methods)) != len(self.methods):
            raise ConfigValidationError("methods: duplicate entries")
        if not self.demo_counts:
            raise ConfigValidationError("demo_counts: must list at least one count")
        for c in self.demo_counts:
            if not isinstance(c, int) or c < 1:
                raise ConfigValidationError("demo_counts: entries must be positive integers")
        if list(self.demo_counts) != sorted(set(self.demo_counts)):
            raise ConfigValidationError("demo_counts: entries must be strictly increasing")
        if not isinstance(self.num_seeds, int) or self.num_seeds < 1:
            raise ConfigValidationError("num_seeds: must be a positive integer")
        if self.evd_mode not in EVD_MODES:
            raise ConfigValidationError(
                f"evd_mode: {self.evd_mode!r} is not one of {EVD_MODES}"
            )
        if not isinstance(self.mc_trajectories, int) or self.mc_trajectories < 1:
            raise ConfigValidationError("mc_trajectories: must be a positive integer")
        if self.feature_map not in FEATURE_MAP_NAMES:
            raise ConfigValidationError(
                f"feature_map: {self.feature_map!r} is not one of {FEATURE_MAP_NAMES}"
            )
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigValidationError("master_seed: must be a non-negative integer")


def experiment_config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "mdp": config_to_dict(config.mdp),
        "methods": list(config.methods),
        "demo_counts": list(config.demo_counts),
        "num_seeds": config.num_seeds,
        "evd_mode": config.evd_mode,
        "mc_trajectories": config.mc_trajectories,
        "feature_map": config.feature_map,
        "output_path": config.output_path,
        "master_seed": config.master_seed,
    }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigValidationError("config: top level must be a JSON object")
    known = {
        "mdp",
        "methods",
        "demo_counts",
        "num_seeds",
        "evd_mode",
        "mc_trajectories",
        "feature_map",
        "output_path",
        "master_seed",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigValidationError(f"config: unknown fields {sorted(unknown)}")
    kwargs = {}
    if "mdp" in data:
        try:
            kwargs["mdp"] = config_from_dict(data["mdp"])
        except ValueError as exc:
            raise ConfigValidationError(f"mdp: {exc}") from exc
    for key in ("methods", "demo_counts"):
        if key in data:
            value = data[key]
            if not isinstance(value, list):
                raise ConfigValidationError(f"{key}: must be a JSON array")
            kwargs[key] = tuple(value)
    for key in ("num_seeds", "evd_mode", "mc_trajectories", "feature_map", "output_path", "master_seed"):
        if key in data:
            kwargs[key] = data[key]
    return ExperimentConfig(**kwargs)


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return experiment_config_from_dict(data)


def cell_stream_id(method: str, reward_kind: str, demo_count: int, seed: int) -> int:
    """Stable 63-bit stream id for one grid cell; independent of method
    ordering, worker scheduling, or Python hash randomization."""
    tag = f"{method}|{reward_kind}|{demo_count}|{seed}".encode()
    digest = hashlib.sha256(tag).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


@dataclass(frozen=True)
class ResultRecord:
    method: str
    reward_kind: str
    demo_count: int
    seed: int
    evd_exact: float | None
    evd_mc: float | None
    mc_stderr: float | None
    fit_seconds: float
    eval_seconds: float
    error: str | None = None


@dataclass(frozen=True)
class _Environment:
    transition: object
    true_reward: np.ndarray
    solution: object
    features: object
    uniform_gap: float


_ENV_CACHE: dict = {}


def _environment(config: ExperimentConfig) -> _Environment:
    key = (config_fingerprint(config.mdp), config.feature_map)
    cached = _ENV_CACHE.get(key)
    if cached is None:
        transition = build_transition_model(config.mdp)
        true_reward = reward_vector(config.mdp)
        solution = soft_value_iteration(transition, true_reward, config.mdp)
        features = feature_map(config.mdp, config.feature_map)
        gap = uniform_policy_gap(transition, config.mdp, true_reward)
        cached = _Environment(
            transition=transition,
            true_reward=true_reward,
            solution=solution,
            features=features,
            uniform_gap=gap,
        )
        _ENV_CACHE[key] = cached
    return cached


def _fit_reward(config: ExperimentConfig, env: _Environment, method, demos, rng_fit):
    if method == "maxent_linear":
        model = fit_linear(demos, env.features, env.transition, config.mdp)
        return reward_from_linear(model, env.features)
    if method == "gpirl":
        model = fit_gpirl(demos, env.transition, config.mdp, env.features, rng=rng_fit)
        return dtc_extrapolate(model, env.features)
    if method == "bnn":
        return bnn_irl(
            demos, env.transition, config.mdp, env.features, BnnSettings(), rng=rng_fit
        )
    raise ValueError(f"unknown method {method!r}")


def run_cell(config: ExperimentConfig, method: str, demo_count: int, seed: int) -> ResultRecord:
    """Fit and score one grid cell. Failures are captured as an error record
    so the rest of the grid is unaffected."""
    env = _environment(config)
    stream = RngStream(
        config.master_seed,
        cell_stream_id(method, config.mdp.reward.kind, demo_count, seed),
    )
    fit_seconds = 0.0
    eval_seconds = 0.0
    try:
        demos = generate_demos(
            config.mdp, env.transition, env.solution, demo_count, stream
        )
        t0 = time.perf_counter()
        inferred = _fit_reward(config, env, method, demos, stream.substream(1))
        fit_seconds = time.perf_counter() - t0

        t1 = time.perf_counter()
        evd_exact = expected_value_difference(
            env.true_reward, inferred, env.transition, config.mdp
        )
        evd_mc = mc_stderr = None
        if config.evd_mode in ("monte_carlo", "both"):
            evd_mc, mc_stderr = monte_carlo_evd(
                env.true_reward,
                inferred,
                env.transition,
                config.mdp,
                config.mc_trajectories,
                stream.substream(2),
            )
        eval_seconds = time.perf_counter() - t1
        return ResultRecord(
            method=method,
            reward_kind=config.mdp.reward.kind,
            demo_count=demo_count,
            seed=seed,
            evd_exact=evd_exact,
            evd_mc=evd_mc,
            mc_stderr=mc_stderr,
            fit_seconds=fit_seconds,
            eval_seconds=eval_seconds,
        )
    except Exception as exc:  # deliberate: one bad cell must not sink the grid
        return ResultRecord(
            method=method,
            reward_kind=config.mdp.reward.kind,
            demo_count=demo_count,
            seed=seed,
            evd_exact=None,
            evd_mc=None,
            mc_stderr=None,
            fit_seconds=fit_seconds,
            eval_seconds=eval_seconds,
            error=f"{type(exc).__name__}: {exc}",
        )


def _run_cell_task(config_dict: dict, method: str, demo_count: int, seed: int) -> ResultRecord:
    config = experiment_config_from_dict(config_dict)
    return run_cell(config, method, demo_count, seed)


def resolve_workers(requested: int | None = None) -> int:
    if requested is not None:
        if requested < 1:
            raise ValueError("worker count must be >= 1")
        return requested
    env_value = os.environ.get(WORKERS_ENV_VAR)
    if env_value is not None:
        try:
            workers = int(env_value)
        except ValueError as exc:
            raise ConfigValidationError(
                f"{WORKERS_ENV_VAR}: expected an integer, got {env_value!r}"
            ) from exc
        if workers < 1:
            raise ConfigValidationError(f"{WORKERS_ENV_VAR}: must be >= 1")
        return workers
    return os.cpu_count() or 1


def grid_cells(config: ExperimentConfig) -> list:
    """Canonical cell order: methods as configured, then demo counts
    ascending, then seeds. Output records always follow this order."""
    return [
        (method, count, seed)
        for method in config.methods
        for count in config.demo_counts
        for seed in range(config.num_seeds)
    ]


def run_grid(config: ExperimentConfig, workers: int | None = None) -> list:
    cells = grid_cells(config)
    workers = min(resolve_workers(workers), len(cells))
    if workers <= 1:
        return [run_cell(config, *cell) for cell in cells]
    config_dict = experiment_config_to_dict(config)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_cell_task, config_dict, *cell) for cell in cells
        ]
        return [f.result() for f in futures]


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_to_row(record: ResultRecord) -> str:
    return ",".join(
        _format_field(v)
        for v in (
            record.method,
            record.reward_kind,
            record.demo_count,
            record.seed,
            record.evd_exact,
            record.evd_mc,
            record.mc_stderr,
            record.fit_seconds,
            record.eval_seconds,
        )
    )


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in records:
            fh.write(record_to_row(record) + "\n")


def record_to_jsonable(record: ResultRecord) -> dict:
    out = {
        "method": record.method,
        "reward_kind": record.reward_kind,
        "demo_count": record.demo_count,
        "seed": record.seed,
        "evd_exact": record.evd_exact,
        "evd_mc": record.evd_mc,
        "mc_stderr": record.mc_stderr,
        "fit_seconds": record.fit_seconds,
        "eval_seconds": record.eval_seconds,
    }
    if record.error is not None:
        out["error"] = record.error
    return out


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_jsonable(record)) + "\n")


def write_meta(config: ExperimentConfig, records, path) -> None:
    env = _environment(config)
    meta = {
        "config": experiment_config_to_dict(config),
        "uniform_policy_gap": env.uniform_gap,
        "num_records": len(records),
        "num_errors": sum(1 for r in records if r.error is not None),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, indent=2) + "\n")


def run_benchmark(config: ExperimentConfig, out_path, workers: int | None = None) -> list:
    """Run the grid and write <out>.csv, <out>.jsonl and <out>.meta.json
    (paths derived from out_path, which names the CSV)."""
    records = run_grid(config, workers)
    out_path = str(out_path)
    write_csv(records, out_path)
    stem = out_path[:-4] if out_path.endswith(".csv") else out_path
    write_jsonl(records, stem + ".jsonl")
    write_meta(config, records, out_path + ".meta.json")
    return records
