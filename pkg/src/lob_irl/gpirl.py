"""Gaussian-process IRL with a deterministic training conditional.

Latent reward values f live on an inducing set (the unique states appearing
in the demonstrations). The full reward is the DTC extrapolation
    r = K_rf (K_ff + noise I)^{-1} f
with the terminal entry pinned to zero. The fit maximizes
    maxent log-likelihood(r(f))
  + log N(f; 0, K_ff + noise I)
  + sum_j log N(theta_j; 0, 2^2)
over f and the log-hyperparameters theta jointly with Adam. The f-gradient is
analytic (pull the tabular likelihood gradient back through the linear DTC
map, minus the GP prior term); theta-gradients are central finite
differences of the whole objective, which keeps the kernel code free of
hand-derived trace terms at negligible cost for inducing sets this size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .demonstrations import DemoSet, FeatureMap
from .environment import MdpConfig, TransitionModel
from .errors import NumericalError
from .maxent import (
    FitDiagnostics,
    _likelihood_and_gradient,
    _likelihood_from_counts,
    stage_step_counts,
)
from .numerics import AdamState, adam_step, cholesky_factor
from scipy.linalg import cho_solve as _cho_solve

HYPER_PRIOR_SD = 2.0


@dataclass(frozen=True)
class KernelHyperparams:
    """ARD squared-exponential parameters, all in log space: amplitude is the
    signal variance, one length scale per feature, and a diagonal noise term
    added only when both row sets are the same."""

    log_amplitude: float
    log_length_scales: tuple
    log_noise: float

    def vector(self) -> np.ndarray:
        return np.array(
            [self.log_amplitude, *self.log_length_scales, self.log_noise]
        )

    @staticmethod
    def from_vector(vec) -> "KernelHyperparams":
        v = np.asarray(vec, dtype=float)
        if v.ndim != 1 or v.shape[0] < 3:
            raise ValueError("hyperparameter vector needs amplitude, scales, noise")
        return KernelHyperparams(
            log_amplitude=float(v[0]),
            log_length_scales=tuple(float(x) for x in v[1:-1]),
            log_noise=float(v[-1]),
        )


def kernel_matrix(hyperparams: KernelHyperparams, rows_a, rows_b=None) -> np.ndarray:
    """k(x, x') = amplitude * exp(-0.5 sum_d ((x_d - x'_d)/l_d)^2), with the
    noise term on the diagonal when rows_b is omitted (or is the same array),
    i.e. only for a set against itself."""
    a = np.atleast_2d(np.asarray(rows_a, dtype=float))
    same = rows_b is None or rows_b is rows_a
    b = a if same else np.atleast_2d(np.asarray(rows_b, dtype=float))
    scales = np.exp(np.asarray(hyperparams.log_length_scales, dtype=float))
    if scales.shape[0] != a.shape[1]:
        raise ValueError(
            f"kernel has {scales.shape[0]} length scales but rows have {a.shape[1]} features"
        )
    d2 = cdist(a / scales, b / scales, "sqeuclidean")
    out = np.exp(hyperparams.log_amplitude) * np.exp(-0.5 * d2)
    if same:
        out[np.diag_indices_from(out)] += np.exp(hyperparams.log_noise)
    return out


@dataclass(frozen=True)
class GpirlModel:
    inducing_state_indices: tuple
    inducing_rows: np.ndarray
    inducing_values: np.ndarray
    hyperparams: KernelHyperparams
    feature_name: str
    diagnostics: FitDiagnostics


def dtc_extrapolate(model: GpirlModel, features: FeatureMap) -> np.ndarray:
    """Reward over all states via the DTC predictive mean; the terminal entry
    (last state) is forced to zero regardless of its zero feature row."""
    if features.name != model.feature_name:
        raise ValueError(
            f"model was fit on feature map {model.feature_name!r}, got {features.name!r}"
        )
    k_ff = kernel_matrix(model.hyperparams, model.inducing_rows)
    lower, _ = cholesky_factor(k_ff)
    alpha = _cho_solve((lower, True), model.inducing_values)
    k_rf = kernel_matrix(model.hyperparams, features.matrix, model.inducing_rows)
    reward = k_rf @ alpha
    reward[-1] = 0.0
    return reward


def _hyper_prior_logpdf(theta: np.ndarray) -> float:
    var = HYPER_PRIOR_SD**2
    return float(
        -0.5 * np.sum(theta**2) / var
        - theta.shape[0] * (math.log(HYPER_PRIOR_SD) + 0.5 * math.log(2.0 * math.pi))
    )


def _objective_pieces(f, theta_vec, inducing_rows, counts, feature_matrix, transition, config):
    """(total, irl_ll, gp_logpdf, prior_logpdf, factor, alpha, k_rf, reward)."""
    hyper = KernelHyperparams.from_vector(theta_vec)
    k_ff = kernel_matrix(hyper, inducing_rows)
    lower, _ = cholesky_factor(k_ff)
    alpha = _cho_solve((lower, True), f)
    k_rf = kernel_matrix(hyper, feature_matrix, inducing_rows)
    reward = k_rf @ alpha
    reward[-1] = 0.0
    irl = _likelihood_from_counts(reward, counts, transition, config)
    n = f.shape[0]
    gp = float(
        -0.5 * f @ alpha
        - np.sum(np.log(np.diag(lower)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    prior = _hyper_prior_logpdf(theta_vec)
    return irl + gp + prior, irl, gp, prior, lower, alpha, k_rf, reward


def gpirl_objective(
    model: GpirlModel,
    demos: DemoSet,
    transition: TransitionModel,
    config: MdpConfig,
    features: FeatureMap,
) -> float:
    counts = stage_step_counts(demos, transition, config)
    total, *_ = _objective_pieces(
        np.asarray(model.inducing_values, dtype=float),
        model.hyperparams.vector(),
        model.inducing_rows,
        counts,
        features.matrix,
        transition,
        config,
    )
    return total


@dataclass(frozen=True)
class GpirlSettings:
    learning_rate: float = 1e-2
    max_iterations: int = 1500
    stall_window: int = 10
    stall_tolerance: float = 1e-6
    theta_fd_step: float = 1e-4


def inducing_state_indices(demos: DemoSet) -> tuple:
    """Unique states appearing anywhere in the demos (step states and final
    arrivals), ascending. The terminal state never appears."""
    seen = set()
    for traj in demos.trajectories:
        for _, state, _ in traj.steps:
            seen.add(state)
        if traj.final_state is not None:
            seen.add(traj.final_state)
    return tuple(sorted(seen))


def fit_gpirl(
    demos: DemoSet,
    transition: TransitionModel,
    config: MdpConfig,
    features: FeatureMap,
    settings: GpirlSettings | None = None,
    rng=None,
) -> GpirlModel:
    """Joint Adam ascent on (f, theta) from f = 0, log scales 0, log noise -2.

    Stops when the objective moved less than stall_tolerance over
    stall_window iterations, or at the iteration cap. The fit is fully
    deterministic; rng is accepted for interface symmetry with the other
    methods and is unused.
    """
    del rng
    settings = settings or GpirlSettings()
    counts = stage_step_counts(demos, transition, config)
    indices = inducing_state_indices(demos)
    if not indices:
        raise ValueError("fit_gpirl: demos contain no states")
    inducing_rows = features.matrix[np.array(indices)]
    n = len(indices)
    m = features.m

    f = np.zeros(n)
    theta = np.concatenate([np.zeros(1 + m), [-2.0]])

    def objective_only(f_val, theta_val) -> float:
        total, *_ = _objective_pieces(
            f_val, theta_val, inducing_rows, counts, features.matrix, transition, config
        )
        return total

    params = np.concatenate([f, theta])
    state = AdamState(learning_rate=settings.learning_rate)
    history: list[float] = []
    obj = math.nan
    grad = np.zeros_like(params)
    iterations = 0
    converged = False
    for iterations in range(1, settings.max_iterations + 1):
        f = params[:n]
        theta = params[n:]
        total, irl, gp, prior, lower, alpha, k_rf, reward = _objective_pieces(
            f, theta, inducing_rows, counts, features.matrix, transition, config
        )
        if not np.isfinite(total):
            raise NumericalError(
                f"GPIRL objective non-finite at iteration {iterations} "
                f"(irl={irl:.6g}, gp={gp:.6g}, prior={prior:.6g})"
            )
        obj = total
        history.append(total)
        if (
            len(history) > settings.stall_window
            and abs(history[-1] - history[-1 - settings.stall_window])
            < settings.stall_tolerance
        ):
            converged = True
            grad = np.zeros_like(params)
            break

        _, grad_r = _likelihood_and_gradient(reward, counts, transition, config)
        g_f = _cho_solve((lower, True), k_rf.T @ grad_r) - alpha
        g_theta = np.empty_like(theta)
        h = settings.theta_fd_step
        for j in range(theta.shape[0]):
            bumped = theta.copy()
            bumped[j] += h
            hi = objective_only(f, bumped)
            bumped[j] -= 2.0 * h
            lo = objective_only(f, bumped)
            g_theta[j] = (hi - lo) / (2.0 * h)
        grad = np.concatenate([g_f, g_theta])
        state, params = adam_step(state, params, -grad)

    f = params[:n]
    theta = params[n:]
    diag = FitDiagnostics(
        iterations=iterations,
        converged=converged,
        final_objective=float(obj),
        final_gradient_norm=float(np.max(np.abs(grad))) if grad.size else 0.0,
    )
    return GpirlModel(
        inducing_state_indices=indices,
        inducing_rows=inducing_rows,
        inducing_values=f.copy(),
        hyperparams=KernelHyperparams.from_vector(theta),
        feature_name=features.name,
        diagnostics=diag,
    )
