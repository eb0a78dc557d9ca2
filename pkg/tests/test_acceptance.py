"""Acceptance gate: one test per shipped guarantee, each printing a single
pass/fail line. Thresholds live inline and are deliberately not shared with
the unit suites. The reward-recovery grids (criteria 4 through 7) dominate
the runtime; everything is exact-arithmetic or small Monte Carlo.
"""

import itertools
import math
import time

import numpy as np
import pytest

import lob_irl as L
from lob_irl.benchmark import ExperimentConfig, run_benchmark, run_grid
from lob_irl.bnn import BnnArchitecture, RewardDataset, VariationalPosterior
from lob_irl.gpirl import _objective_pieces
from lob_irl.maxent import _likelihood_and_gradient, stage_step_counts


def _report(num: int, slug: str, ok: bool, detail: str) -> None:
    print(f"criterion {num} ({slug}): {'PASS' if ok else 'FAIL'} [{detail}]")


def brute_force_pmf(probs):
    """2^n enumeration of the Bernoulli-sum distribution."""
    n = len(probs)
    pmf = np.zeros(n + 1)
    for bits in itertools.product((0, 1), repeat=n):
        weight = 1.0
        for b, p in zip(bits, probs):
            weight *= p if b else (1.0 - p)
        pmf[sum(bits)] += weight
    return pmf


def grid_medians(records):
    """(method, demo_count) -> median exact EVD; asserts every cell succeeded."""
    failed = [r for r in records if r.error is not None]
    assert not failed, f"grid cells failed: {[r.error for r in failed][:3]}"
    out = {}
    for record in records:
        out.setdefault((record.method, record.demo_count), []).append(record.evd_exact)
    return {key: float(np.median(values)) for key, values in out.items()}


def test_criterion_1_dynamics_exactness(config, transition):
    start = time.perf_counter()
    rng = np.random.default_rng(0)

    # exact pmf against 2^n enumeration
    worst_pmf = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        probs = rng.uniform(0.0, 1.0, size=n)
        got = L.poisson_binomial_pmf(probs)
        worst_pmf = max(worst_pmf, float(np.abs(got - brute_force_pmf(probs)).max()))

    row_sums = transition.tensor.sum(axis=2)
    worst_row = float(np.abs(row_sums - 1.0).max())

    # 10^6 sampled steps across ten (state, action) cells, drawn through the
    # same trader-bid factorization the rollout samplers use
    per_cell = 100_000
    gen = np.random.default_rng(7)
    cells = [(L.state_index(config, L.State(2, 1, 0)), 5),
             (L.state_index(config, L.State(3, 0, 5)), 9)]
    while len(cells) < 10:
        s = int(gen.integers(0, transition.num_states - 1))
        a = int(gen.integers(0, transition.num_actions))
        if (s, a) not in cells:
            cells.append((s, a))
    worst_mc = 0.0
    for s, a in cells:
        draws = gen.random((per_cell, transition.trader_bid_probs.shape[1]))
        k = (draws < transition.trader_bid_probs[s]).sum(axis=1)
        arrivals = transition.next_state_table[s, a, k]
        freq = np.bincount(arrivals, minlength=transition.num_states) / per_cell
        p = transition.tensor[s, a]
        se = np.sqrt(p * (1.0 - p) / per_cell)
        worst_mc = max(worst_mc, float(np.max(np.abs(freq - p) - 4.0 * se)))

    elapsed = time.perf_counter() - start
    ok = worst_pmf < 1e-12 and worst_row < 1e-9 and worst_mc <= 1e-12 and elapsed < 60.0
    _report(
        1,
        "dynamics exactness",
        ok,
        f"pmf {worst_pmf:.2e}, rows {worst_row:.2e}, mc excess {worst_mc:.2e}, {elapsed:.1f}s",
    )
    assert worst_pmf < 1e-12
    assert worst_row < 1e-9
    assert worst_mc <= 1e-12
    assert elapsed < 60.0


def test_criterion_2_solver_correctness(config, transition):
    start = time.perf_counter()

    zero = L.soft_value_iteration(transition, np.zeros(transition.num_states), config)
    uniform_dev = float(np.abs(zero.policy - 1.0 / transition.num_actions).max())

    rng = np.random.default_rng(1)
    base = rng.normal(size=transition.num_states)
    base[-1] = 0.0
    shifted = base + 3.7
    a = L.soft_value_iteration(transition, base, config)
    b = L.soft_value_iteration(transition, shifted, config)
    shift_dev = float(np.abs(a.policy - b.policy).max())

    worst_sigma = 0.0
    for i in range(5):
        reward = rng.normal(size=transition.num_states)
        reward[-1] = 0.0
        solution = L.soft_value_iteration(transition, reward, config)
        exact = L.expected_return(transition, solution.policy, reward, config)
        returns = L.rollout_returns(
            transition, solution.policy, reward, config, 100_000, L.RngStream(50 + i)
        )
        se = float(returns.std(ddof=1) / math.sqrt(returns.size))
        worst_sigma = max(worst_sigma, abs(float(returns.mean()) - exact) / se)

    elapsed = time.perf_counter() - start
    ok = uniform_dev < 1e-10 and shift_dev < 1e-9 and worst_sigma < 3.0 and elapsed < 120.0
    _report(
        2,
        "solver correctness",
        ok,
        f"uniform {uniform_dev:.2e}, shift {shift_dev:.2e}, "
        f"mc {worst_sigma:.2f} sigma, {elapsed:.1f}s",
    )
    assert uniform_dev < 1e-10
    assert shift_dev < 1e-9
    assert worst_sigma < 3.0
    assert elapsed < 120.0


def test_criterion_3_gradient_suite(config, transition, features, expert_solution):
    start = time.perf_counter()
    demos = L.generate_demos(config, transition, expert_solution, 100, L.RngStream(21))
    counts = stage_step_counts(demos, transition, config)
    n_free = transition.num_states - 1
    rng = np.random.default_rng(2)

    def tab_objective(x):
        value, _ = _likelihood_and_gradient(np.append(x, 0.0), counts, transition, config)
        return value

    def tab_gradient(x):
        _, grad = _likelihood_and_gradient(np.append(x, 0.0), counts, transition, config)
        return grad[:-1]

    worst_tab = max(
        L.check_gradient(tab_objective, tab_gradient, rng.normal(size=n_free) * 0.5, step=1e-4)
        for _ in range(20)
    )

    def lin_objective(w):
        return L.maxent_log_likelihood(features.matrix @ w, demos, transition, config)

    def lin_gradient(w):
        return L.maxent_gradient_linear(w, demos, features, transition, config)

    worst_lin = max(
        L.check_gradient(lin_objective, lin_gradient, rng.normal(size=features.m), step=1e-4)
        for _ in range(20)
    )

    indices = L.inducing_state_indices(demos)
    rows = features.matrix[np.array(indices)]
    theta = np.array([0.2, 0.1, -0.2, 0.3, 0.0, -2.0])

    def gp_objective(f):
        return _objective_pieces(f, theta, rows, counts, features.matrix, transition, config)[0]

    def gp_gradient(f):
        from scipy.linalg import cho_solve

        _, _, _, _, lower, alpha, k_rf, reward = _objective_pieces(
            f, theta, rows, counts, features.matrix, transition, config
        )
        _, grad_r = _likelihood_and_gradient(reward, counts, transition, config)
        return cho_solve((lower, True), k_rf.T @ grad_r) - alpha

    worst_gp = max(
        L.check_gradient(gp_objective, gp_gradient, rng.normal(size=len(indices)) * 0.5, step=1e-4)
        for _ in range(10)
    )

    # deterministic limit: collapse the posterior onto mu and check the
    # reparameterized mu-gradient of the single-sample ELBO
    arch = BnnArchitecture(layer_sizes=(3, 5, 1))
    data_rows = rng.uniform(-1.0, 1.0, size=(12, 3))
    dataset = RewardDataset(
        features=data_rows,
        targets=np.sin(data_rows.sum(axis=1)),
        weights=rng.uniform(0.5, 2.0, size=12),
    )

    def bnn_objective(mu):
        post = VariationalPosterior(mu=mu, rho=np.full(mu.size, -20.0))
        return L.elbo_estimate(post, arch, dataset, num_samples=1, rng=L.RngStream(5)).value

    def bnn_gradient(mu):
        post = VariationalPosterior(mu=mu, rho=np.full(mu.size, -20.0))
        return L.elbo_gradient(post, arch, dataset, num_samples=1, rng=L.RngStream(5))[0]

    worst_bnn = L.check_gradient(
        bnn_objective, bnn_gradient, rng.normal(size=arch.num_parameters) * 0.5, step=1e-6
    )

    elapsed = time.perf_counter() - start
    ok = (
        worst_tab < 1e-5
        and worst_lin < 1e-5
        and worst_gp < 1e-4
        and worst_bnn < 1e-4
        and elapsed < 300.0
    )
    _report(
        3,
        "gradient suite",
        ok,
        f"tabular {worst_tab:.2e}, linear {worst_lin:.2e}, gp {worst_gp:.2e}, "
        f"bnn {worst_bnn:.2e}, {elapsed:.1f}s",
    )
    assert worst_tab < 1e-5
    assert worst_lin < 1e-5
    assert worst_gp < 1e-4
    assert worst_bnn < 1e-4
    assert elapsed < 300.0


def test_criterion_4_linear_reward_recovery(config, transition, true_reward):
    start = time.perf_counter()
    grid = ExperimentConfig(
        methods=("maxent_linear", "gpirl", "bnn"), demo_counts=(4096,), num_seeds=10
    )
    medians = grid_medians(run_grid(grid, workers=1))
    gap = L.uniform_policy_gap(transition, config, true_reward)
    ratios = {m: medians[(m, 4096)] / gap for m in grid.methods}
    elapsed = time.perf_counter() - start
    ok = all(r <= 0.05 for r in ratios.values())
    detail = ", ".join(f"{m} {r * 100:.2f}%" for m, r in ratios.items())
    _report(4, "linear reward recovery", ok, f"median EVD/gap: {detail}, {elapsed:.0f}s")
    for method, ratio in ratios.items():
        assert ratio <= 0.05, f"{method}: median EVD {ratio * 100:.2f}% of gap"


EXP_COUNTS = (512, 1024, 2048, 4096, 8192, 16384)


@pytest.fixture(scope="module")
def exponential_grid():
    mdp = L.MdpConfig(reward=L.RewardSpec(kind="exponential"))
    start = time.perf_counter()
    main = run_grid(
        ExperimentConfig(mdp=mdp, methods=("gpirl", "bnn"), demo_counts=EXP_COUNTS, num_seeds=10),
        workers=1,
    )
    linear = run_grid(
        ExperimentConfig(mdp=mdp, methods=("maxent_linear",), demo_counts=(8192,), num_seeds=10),
        workers=1,
    )
    transition = L.build_transition_model(mdp)
    gap = L.uniform_policy_gap(transition, mdp, L.reward_vector(mdp))
    return {
        "medians": grid_medians(list(main) + list(linear)),
        "gap": gap,
        "seconds": time.perf_counter() - start,
    }


def test_criterion_5_exponential_reward_separation(exponential_grid):
    medians = exponential_grid["medians"]
    linear_med = medians[("maxent_linear", 8192)]
    gp_med = medians[("gpirl", 8192)]
    bnn_med = medians[("bnn", 8192)]
    ok = gp_med < 0.5 * linear_med and bnn_med < 0.5 * linear_med
    _report(
        5,
        "exponential reward separation",
        ok,
        f"at 8192: linear {linear_med:.4f}, gpirl {gp_med:.4f}, bnn {bnn_med:.4f}, "
        f"grid {exponential_grid['seconds']:.0f}s",
    )
    assert gp_med < 0.5 * linear_med
    assert bnn_med < 0.5 * linear_med


def test_criterion_6_bnn_vs_gp_at_scale(exponential_grid):
    medians = exponential_grid["medians"]
    gp_med = medians[("gpirl", 16384)]
    bnn_med = medians[("bnn", 16384)]
    ok = bnn_med <= gp_med
    # soft criterion: a miss within 10% relative is flagged, not fatal
    flagged = not ok and bnn_med <= 1.1 * gp_med
    status = "PASS" if ok else ("FLAGGED" if flagged else "FAIL")
    print(
        f"criterion 6 (bnn vs gp at scale): {status} "
        f"[at 16384: bnn {bnn_med:.4f}, gpirl {gp_med:.4f}]"
    )
    assert ok or flagged, f"bnn median {bnn_med:.4f} vs gpirl {gp_med:.4f}"


def test_criterion_7_trend_property(exponential_grid):
    medians = exponential_grid["medians"]
    gap = exponential_grid["gap"]
    violations = {}
    for method in ("gpirl", "bnn"):
        curve = [medians[(method, c)] for c in EXP_COUNTS]
        inversions = [
            curve[i + 1] - curve[i] for i in range(len(curve) - 1) if curve[i + 1] > curve[i]
        ]
        violations[method] = inversions
    ok = all(
        len(inv) <= 1 and all(size < 0.1 * gap for size in inv)
        for inv in violations.values()
    )
    detail = ", ".join(
        f"{m}: {len(v)} inversions (max {max(v) if v else 0.0:.4f})"
        for m, v in violations.items()
    )
    _report(7, "trend property", ok, f"{detail}, gap {gap:.4f}")
    for method, inversions in violations.items():
        assert len(inversions) <= 1, f"{method}: {len(inversions)} inversions"
        for size in inversions:
            assert size < 0.1 * gap, f"{method}: inversion {size:.4f} vs {0.1 * gap:.4f}"


def test_criterion_8_determinism(tmp_path):
    config = ExperimentConfig(
        methods=("maxent_linear", "gpirl", "bnn"), demo_counts=(64,), num_seeds=2
    )

    def reduced_csv(workers):
        path = tmp_path / f"workers{workers}.csv"
        records = run_benchmark(config, path, workers=workers)
        assert all(r.error is None for r in records)
        lines = path.read_text().splitlines()
        # drop the two trailing timing columns from every row
        return "\n".join(",".join(line.split(",")[:7]) for line in lines)

    serial = reduced_csv(1)
    parallel = reduced_csv(2)
    repeat = reduced_csv(3)
    ok = serial == parallel == repeat
    _report(8, "determinism", ok, f"{len(serial.splitlines()) - 1} rows x 3 runs")
    assert serial == parallel
    assert serial == repeat
