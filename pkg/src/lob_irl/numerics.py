"""Shared numerical kernels: stable log-sum-exp, damped Cholesky solves,
Adam updates, a finite-difference gradient checker, and keyed random streams.

Everything in this module is deterministic given its inputs. The random
streams are counter-based (Philox), so stream (master_seed, stream_id) yields
the same draws no matter which other streams were consumed first or on which
worker it runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import NumericalError

_MASK64 = (1 << 64) - 1


def log_sum_exp(values, axis=None):
    """log(sum(exp(values))) computed with the max-shift trick.

    Entries may be finite or -inf. An all--inf reduction returns -inf rather
    than raising. With axis=None a Python float is returned, otherwise an
    array reduced along that axis.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("log_sum_exp: empty input")
    if np.isnan(arr).any():
        raise ValueError("log_sum_exp: NaN in input")
    hi = arr.max(axis=axis, keepdims=True)
    # Where the whole slice is -inf the shift would produce nan; shift by 0
    # there and let log(0) fall through to -inf.
    shift = np.where(np.isfinite(hi), hi, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(arr - shift).sum(axis=axis, keepdims=True)) + shift
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def _jitter_schedule(requested: float, mean_diag: float):
    """Requested jitter first, then 1e-8*mean_diag escalating by 10x up to
    1e-4*mean_diag."""
    yield requested
    scale = mean_diag if mean_diag > 0 else 1.0
    step = 1e-8 * scale
    ceiling = 1e-4 * scale
    while step <= ceiling * (1 + 1e-12):
        if step > requested:
            yield step
        step *= 10.0


def cholesky_factor(matrix, jitter: float = 0.0):
    """Lower Cholesky factor of (matrix + jitter*I), escalating the jitter
    through the documented schedule on failure.

    Returns (lower_factor, used_jitter). Raises NumericalError if the matrix
    is not positive definite even at the largest allowed jitter.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("cholesky_factor: matrix must be square")
    if a.size and np.abs(a - a.T).max() > 1e-10:
        raise ValueError("cholesky_factor: matrix must be symmetric to 1e-10")
    if jitter < 0:
        raise ValueError("cholesky_factor: jitter must be >= 0")
    mean_diag = float(np.abs(np.diag(a)).mean()) if a.size else 1.0
    for j in _jitter_schedule(jitter, mean_diag):
        try:
            lower = scipy.linalg.cholesky(a + j * np.eye(a.shape[0]), lower=True)
            return lower, j
        except scipy.linalg.LinAlgError:
            continue
    raise NumericalError(
        "cholesky_factor: matrix not positive definite after jitter schedule "
        f"(mean diagonal {mean_diag:.3e})"
    )


def cholesky_solve(matrix, rhs, jitter: float = 0.0):
    """Solve (matrix + jitter*I) X = rhs for symmetric positive definite
    input, with the same escalating jitter schedule as cholesky_factor."""
    b = np.asarray(rhs, dtype=float)
    lower, _ = cholesky_factor(matrix, jitter)
    if b.shape[0] != lower.shape[0]:
        raise ValueError("cholesky_solve: rhs length does not match matrix")
    return scipy.linalg.cho_solve((lower, True), b)


@dataclass
class AdamState:
    """Moment state for the standard Adam recurrence (descent convention;
    callers maximizing an objective pass the negated gradient)."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, params, gradient):
    """One Adam descent step. Returns (new_state, new_params) without
    mutating the inputs."""
    p = np.asarray(params, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if p.shape != g.shape:
        raise ValueError("adam_step: params and gradient shapes differ")
    if not np.isfinite(g).all():
        raise NumericalError("adam_step: non-finite gradient")
    m = np.zeros_like(p) if state.m is None else state.m
    v = np.zeros_like(p) if state.v is None else state.v
    if m.shape != p.shape or v.shape != p.shape:
        raise ValueError("adam_step: moment shapes do not match params")
    t = state.step + 1
    m = state.beta1 * m + (1 - state.beta1) * g
    v = state.beta2 * v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        step=t,
        m=m,
        v=v,
    )
    return new_state, new_params


def check_gradient(f: Callable, grad_f: Callable, point, step: float = 1e-5) -> float:
    """Max over coordinates of the relative error between grad_f(point) and
    central finite differences of f.

    Per-coordinate error is |analytic - fd| / max(|analytic|, |fd|) except
    when both magnitudes sit below an absolute floor of 1e-10, where the
    absolute difference is reported instead (so exact zero gradients score 0).
    """
    if step <= 0:
        raise ValueError("check_gradient: step must be > 0")
    x = np.asarray(point, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("check_gradient: point must be finite")
    analytic = np.asarray(grad_f(x), dtype=float)
    if analytic.shape != x.shape:
        raise ValueError("check_gradient: gradient shape does not match point")
    fd = np.empty_like(x)
    flat = x.ravel()
    fd_flat = fd.ravel()
    for j in range(flat.size):
        bump = np.zeros_like(flat)
        bump[j] = step
        hi = float(f((flat + bump).reshape(x.shape)))
        lo = float(f((flat - bump).reshape(x.shape)))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericalError("check_gradient: non-finite function value")
        fd_flat[j] = (hi - lo) / (2 * step)
    scale = np.maximum(np.abs(analytic), np.abs(fd))
    err = np.where(
        scale > 1e-10,
        np.abs(analytic - fd) / np.maximum(scale, 1e-10),
        np.abs(analytic - fd),
    )
    return float(err.max())


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """A keyed, counter-based random stream.

    Streams with the same (master_seed, stream_id) are bitwise identical
    across runs, processes and thread schedules; distinct ids are
    statistically independent. substream() derives child ids stably so a
    consumer can fan out (per trajectory, per cell) without coordination.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.stream_id < 0:
            raise ValueError("RngStream: seeds must be non-negative")

    def generator(self) -> np.random.Generator:
        key = [self.master_seed & _MASK64, self.stream_id & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        if index < 0:
            raise ValueError("RngStream.substream: index must be non-negative")
        mixed = _splitmix64((self.stream_id * 0x9E3779B97F4A7C15 + index + 1) & _MASK64)
        return RngStream(self.master_seed, mixed)


def as_generator(rng) -> np.random.Generator:
    """Accept either an RngStream or a numpy Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")
