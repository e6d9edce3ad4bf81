import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fastproj.dual_oracle import approx_dual_oracle
from fastproj.model import (
    ConstraintOracle,
    ContractViolation,
    ProjectionProblem,
    SolverConfig,
    quadratic_constraint,
    quadratic_problem,
)
from fastproj.projector import (
    bound_R_quadratic,
    bound_R_single,
    project,
    project_with_R_doubling,
    r_epsilon,
)
from fastproj.reference import GridSpec, brute_force_dual_grid

from conftest import (
    ball_dual_gradient,
    ball_dual_value,
    random_psd,
    unit_ball_problem,
)


def test_ball_projection_both_engines():
    prob = unit_ball_problem([2.0, 0.0])
    for engine in ("ellipsoid", "bisection"):
        res = project(prob, SolverConfig(epsilon=1e-4, engine=engine))
        assert_allclose(res.x_hat, [1.0, 0.0], atol=1e-3)
        assert res.objective == pytest.approx(1.0, abs=6e-4)
        assert res.lambda_bar[0] == pytest.approx(1.0, abs=1e-2)
        assert res.max_violation <= 1e-4


def test_interior_point_projects_to_itself():
    prob = unit_ball_problem([0.4, -0.2], R=1.0)
    res = project(prob, SolverConfig(epsilon=1e-4))
    assert_allclose(res.x_hat, prob.x0, atol=1e-5)
    assert res.lambda_bar[0] <= 1e-2


def test_bisection_engine_requires_single_constraint(rng):
    quads = [
        quadratic_constraint(np.eye(2), np.zeros(2), 1.0),
        quadratic_constraint(np.eye(2), np.ones(2) * 0.1, 1.0),
    ]
    prob = quadratic_problem(np.array([3.0, 0.0]), quads, R=4.0)
    with pytest.raises(ContractViolation):
        project(prob, SolverConfig(epsilon=1e-3, engine="bisection"))


def test_matches_dual_grid_oracle(rng):
    n = 12
    quads = [
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.0),
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.4),
    ]
    x0 = rng.standard_normal(n)
    x0 *= 3.0 / np.linalg.norm(x0)
    prob = quadratic_problem(x0, quads, R=6.0)
    eps = 1e-3
    res = project(prob, SolverConfig(epsilon=eps))
    x_ref, _, _ = brute_force_dual_grid(prob, GridSpec(resolution=150))
    assert res.objective <= float(np.sum((x_ref - x0) ** 2)) + 6.0 * eps
    assert res.max_violation <= eps


def test_multiplier_stays_in_box():
    prob = unit_ball_problem([5.0, 0.0], R=16.0)
    res = project(prob, SolverConfig(epsilon=1e-4))
    assert np.all(res.lambda_bar >= 0.0) and np.all(res.lambda_bar <= 16.0)
    assert res.lambda_bar[0] == pytest.approx(4.0, abs=1e-2)


def test_result_fields_recomputed_from_x_hat():
    prob = unit_ball_problem([2.0, 0.0])
    res = project(prob, SolverConfig(epsilon=1e-4))
    assert res.objective == float(np.sum((res.x_hat - prob.x0) ** 2))
    assert res.max_violation == float(res.x_hat @ res.x_hat) - 1.0
    assert res.oracle_calls >= 2
    assert res.inner_gradient_evals > 0


def test_translation_bound_at_returned_dual_point():
    # smooth-concavity bound linking the dual gap to the gradient mismatch
    x0 = np.array([2.0, 0.0])
    prob = unit_ball_problem(x0)
    res = project(prob, SolverConfig(epsilon=1e-4))
    G = prob.max_lipschitz()
    lam_star = 1.0
    lam_bar = float(res.lambda_bar[0])
    gap = ball_dual_value(x0, lam_star) - ball_dual_value(x0, lam_bar)
    grad_diff_sq = (ball_dual_gradient(x0, lam_bar) - ball_dual_gradient(x0, lam_star)) ** 2
    assert grad_diff_sq <= 2.0 * (prob.m * G * G) * gap + 1e-12


def test_primal_recovery_at_exact_multiplier():
    x0 = np.array([2.0, 1.0, 2.0])
    prob = unit_ball_problem(x0)
    lam_star = float(np.linalg.norm(x0)) - 1.0
    triple = approx_dual_oracle(prob, np.array([lam_star]), 1e-12)
    assert_allclose(triple.x_lambda, x0 / np.linalg.norm(x0), atol=1e-6)


def test_scaling_invariance():
    # h -> a h with R -> R/a leaves the feasible set and the output unchanged
    x0 = np.array([2.0, 0.0])
    base = unit_ball_problem(x0, R=4.0)
    res_base = project(base, SolverConfig(epsilon=1e-5))
    a = 8.0
    inner = base.constraints[0]
    scaled = ConstraintOracle(
        eval=lambda x: a * inner.eval(x),
        grad=lambda x: a * inner.grad(x),
        lipschitz_G=a * inner.lipschitz_G,
        smoothness_L=a * inner.smoothness_L,
    )
    # R/a would fall below the R >= 1 convention, so clamp it
    prob = ProjectionProblem(x0=x0, constraints=(scaled,), R=max(1.0, 4.0 / a))
    res = project(prob, SolverConfig(epsilon=1e-5))
    assert np.linalg.norm(res.x_hat - res_base.x_hat) <= 1e-3


def test_monotone_best_value_in_trace():
    prob = unit_ball_problem([3.0, 1.0])
    res = project(prob, SolverConfig(epsilon=1e-5))
    best = -np.inf
    for in_box, v in zip(res.trace.in_box, res.trace.v):
        if in_box:
            best = max(best, v)
            assert best >= v
    assert res.dual_value == pytest.approx(best, abs=1e-7)


def test_outer_budget_cap_respected():
    prob = unit_ball_problem([2.0, 0.0])
    res = project(prob, SolverConfig(epsilon=1e-6, max_outer_iterations=3))
    assert len(res.trace) <= 3


def test_result_json_shape():
    prob = unit_ball_problem([2.0, 0.0])
    res = project(prob, SolverConfig(epsilon=1e-4))
    doc = json.loads(res.to_json())
    assert set(doc) == {
        "x_hat",
        "lambda_bar",
        "objective",
        "max_violation",
        "dual_value",
        "oracle_calls",
        "doubling_rounds",
    }


# ----------------------------------------------------------------- R bounds


def test_bound_r_single_examples():
    assert bound_R_single(1.0, 2.0) == 4.0
    assert bound_R_single(10.0, 1.0) == 1.0  # clamped
    # unit ball with x0=(2,0): gradient norm 2 on the boundary, distance 1
    assert bound_R_single(2.0, 1.0) >= 1.0


def test_bound_r_quadratic_examples():
    assert bound_R_quadratic(np.array([1.0, 1.0]), 2.0, 1.0) == 2.0
    assert bound_R_quadratic(np.array([4.0]), 1.0, 1.0) == 1.0  # clamped
    # centered ball x^T x <= 1 with x0=(2,0): exact multiplier 1, bound tight
    assert bound_R_quadratic(np.array([1.0]), 1.0, 1.0) == 1.0


def test_r_epsilon_examples():
    assert r_epsilon(1.0, 1, 1.0, 1.0) == 0.5
    assert r_epsilon(0.01, 2, 1.0, 1.0) == pytest.approx(0.0025)
    assert r_epsilon(0.04, 1, 1.0, 1.0) == 2.0 * r_epsilon(0.04, 2, 1.0, 1.0)
    with pytest.raises(ContractViolation):
        r_epsilon(1.5, 1, 1.0, 1.0)


# ----------------------------------------------------------------- doubling


def test_doubling_from_underestimated_radius():
    # true multiplier 3: R grows 1 -> 2 -> 4 and the solve then stays interior
    prob = unit_ball_problem([4.0, 0.0], R=1.0)
    res = project_with_R_doubling(prob, SolverConfig(epsilon=1e-4, max_doubling_rounds=8))
    assert res.doubling_rounds_used == 2
    assert res.lambda_bar[0] == pytest.approx(3.0, abs=1e-2)
    assert_allclose(res.x_hat, [1.0, 0.0], atol=1e-3)
    assert not res.trace.boundary_hit


def test_doubling_interior_point_unchanged():
    prob = unit_ball_problem([0.2, 0.1], R=1.0)
    res = project_with_R_doubling(prob, SolverConfig(epsilon=1e-4, max_doubling_rounds=8))
    assert res.doubling_rounds_used == 0


def test_doubling_not_triggered_for_interior_multiplier():
    prob = unit_ball_problem([1.5, 0.0], R=1.0)  # multiplier 0.5 < 0.9
    res = project_with_R_doubling(prob, SolverConfig(epsilon=1e-4, max_doubling_rounds=8))
    assert res.doubling_rounds_used == 0
    assert res.lambda_bar[0] == pytest.approx(0.5, abs=1e-2)


def test_doubling_budget_exhaustion_flags_trace():
    prob = unit_ball_problem([9.0, 0.0], R=1.0)  # multiplier 8 needs 3 doublings
    res = project_with_R_doubling(prob, SolverConfig(epsilon=1e-4, max_doubling_rounds=1))
    assert res.doubling_rounds_used == 1
    assert res.trace.boundary_hit


def test_theoretical_schedule_contract_small_sweep(rng):
    # randomized spot check of the end-to-end contract at the default schedule
    for seed in range(3):
        r = np.random.default_rng(seed)
        n = 5
        quads = [
            quadratic_constraint(random_psd(r, n), r.standard_normal(n) * 0.2, 1.0)
        ]
        x0 = r.standard_normal(n)
        x0 *= 2.0 / np.linalg.norm(x0)
        prob = quadratic_problem(x0, quads, R=4.0)
        eps = 1e-3
        res = project(prob, SolverConfig(epsilon=eps))
        x_ref, _, _ = brute_force_dual_grid(prob, GridSpec(resolution=120))
        assert res.max_violation <= eps
        assert res.objective <= float(np.sum((x_ref - x0) ** 2)) + 6 * eps


def test_three_constraints_ellipsoid(rng):
    # the engine is not limited to m <= 2 (only the grid oracle is)
    n = 8
    quads = [
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, c)
        for c in (1.0, 1.3, 1.6)
    ]
    x0 = rng.standard_normal(n)
    x0 *= 3.0 / np.linalg.norm(x0)
    prob = quadratic_problem(x0, quads, R=6.0)
    eps = 1e-3
    res = project(prob, SolverConfig(epsilon=eps))
    assert res.max_violation <= eps
    assert res.lambda_bar.shape == (3,)
    # objective must not beat any feasible point by more than 6 eps;
    # use the most-constrained center direction as a feasible witness
    anchor = np.mean([q.meta["center"] for q in quads], axis=0)
    assert np.max([float(q.eval(anchor)) for q in quads]) < 0
    assert res.objective <= float(np.sum((anchor - x0) ** 2)) + 6 * eps


def test_warm_start_matches_cold(rng):
    n = 10
    quads = [
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.0),
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.4),
    ]
    x0 = rng.standard_normal(n)
    x0 *= 2.5 / np.linalg.norm(x0)
    prob = quadratic_problem(x0, quads, R=5.0)
    cold = project(prob, SolverConfig(epsilon=1e-4, warm_start=False))
    warm = project(prob, SolverConfig(epsilon=1e-4, warm_start=True))
    # the certificate makes the guarantee start-point independent
    assert np.linalg.norm(cold.x_hat - warm.x_hat) <= 1e-3
    assert abs(cold.objective - warm.objective) <= 6e-4
    assert warm.max_violation <= 1e-4


def test_numerical_failure_carries_partial_trace():
    from fastproj.model import ConstraintOracle, NumericalFailure

    calls = [0]

    def poisoned_grad(x):
        calls[0] += 1
        if calls[0] > 40:
            return np.full(2, np.nan)
        return 2.0 * x

    bad = ConstraintOracle(
        eval=lambda x: float(x @ x) - 1.0,
        grad=poisoned_grad,
        lipschitz_G=8.0,
        smoothness_L=2.0,
    )
    prob = ProjectionProblem(x0=np.array([2.0, 0.0]), constraints=(bad,), R=4.0)
    with pytest.raises(NumericalFailure) as exc:
        project(prob, SolverConfig(epsilon=1e-6))
    assert hasattr(exc.value, "trace")


def test_concurrent_solves_share_problem(rng):
    from concurrent.futures import ThreadPoolExecutor

    n = 8
    quads = [
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.0),
        quadratic_constraint(random_psd(rng, n), rng.standard_normal(n) * 0.2, 1.3),
    ]
    x0 = rng.standard_normal(n)
    x0 *= 2.5 / np.linalg.norm(x0)
    prob = quadratic_problem(x0, quads, R=5.0)
    cfg = SolverConfig(epsilon=1e-4)
    sequential = project(prob, cfg)
    with ThreadPoolExecutor(max_workers=4) as pool:
        results = list(pool.map(lambda _: project(prob, cfg), range(4)))
    for res in results:
        assert np.array_equal(res.x_hat, sequential.x_hat)
        assert res.objective == sequential.objective


def test_diagnostic_bounds_do_not_change_the_answer():
    prob = unit_ball_problem([2.0, 0.0])
    plain = project(prob, SolverConfig(epsilon=1e-4))
    helped = project(prob, SolverConfig(epsilon=1e-4), H=3.0, B=1.5)
    assert np.linalg.norm(plain.x_hat - helped.x_hat) <= 1e-4
    assert helped.max_violation <= 1e-4
