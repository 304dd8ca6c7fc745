import numpy as np
import pytest

from calibrank.calibration_lp import (
    CorruptSolutionError,
    sanitize,
    solve_full,
    solve_reduced,
)
from calibrank.core_model import CategoryDistribution, RankingProblem

from _oracles import best_topk_objective, random_problem


def small_problem(scores, weights, categories, target, lam):
    return RankingProblem(
        np.array(scores, dtype=float),
        np.array(weights, dtype=float),
        np.array(categories, dtype=float),
        CategoryDistribution(np.array(target, dtype=float)),
        lam,
    )


class TestSolveFull:
    def test_pure_relevance_is_sorting(self):
        """At lam = 0 the optimum is score-descending assignment: 3*.5 + 2*.3 + 1*.2."""
        problem = small_problem(
            [3.0, 2.0, 1.0],
            [0.5, 0.3, 0.2],
            np.eye(3),
            [1 / 3] * 3,
            0.0,
        )
        solution = solve_full(problem)
        assert solution.objective == pytest.approx(2.3, abs=1e-7)
        # distinct scores make the optimal vertex unique: the identity assignment
        assert np.allclose(solution.matrix.values, np.eye(3), atol=1e-7)

    def test_pure_calibration_with_achievable_target(self):
        """When some permutation hits the target exactly, slack and objective vanish."""
        problem = small_problem(
            [1.0, 2.0],
            [0.6, 0.4],
            np.eye(2),
            [0.6, 0.4],
            1.0,
        )
        solution = solve_full(problem)
        assert solution.epsilon.sum() == pytest.approx(0.0, abs=1e-7)
        assert solution.objective == pytest.approx(0.0, abs=1e-7)

    def test_dominates_every_permutation(self):
        """The LP relaxes the permutation problem, so its optimum is an upper bound."""
        rng = np.random.default_rng(11)
        for _ in range(5):
            problem = random_problem(rng, n=5, k=5, r=3, lam=0.5)
            solution = solve_full(problem)
            assert solution.objective >= best_topk_objective(problem) - 1e-6


class TestSolveReduced:
    def test_pure_relevance_top_k(self):
        problem = small_problem(
            [4.0, 3.0, 2.0, 1.0],
            [0.7, 0.3],
            np.eye(4),
            [0.25] * 4,
            0.0,
        )
        solution = solve_reduced(problem)
        assert solution.matrix.values[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert solution.matrix.values[1, 1] == pytest.approx(1.0, abs=1e-9)
        expected = 4.0 * 0.7 + 3.0 * 0.3
        assert solution.objective == pytest.approx(expected, abs=1e-7)

    def test_matches_full_formulation(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(4, 14))
            k = int(rng.integers(1, min(n, 6) + 1))
            problem = random_problem(rng, n=n, k=k, r=int(rng.integers(2, 5)), lam=float(rng.uniform()))
            reduced = solve_reduced(problem)
            full = solve_full(problem)
            assert reduced.objective == pytest.approx(full.objective, abs=1e-6)

    def test_rejects_invalid_problem(self):
        problem = random_problem(np.random.default_rng(13), n=5, k=3, r=2, lam=0.5)
        with pytest.raises(ValueError, match="lambda"):
            solve_reduced(problem.with_lambda(1.5))

    def test_objective_recomputation_identity(self):
        problem = random_problem(np.random.default_rng(14), n=10, k=4, r=3, lam=0.4)
        solution = solve_reduced(problem)
        relevance = float(problem.scores @ solution.matrix.values @ problem.position_weights)
        recomputed = (1 - problem.lam) * relevance - problem.lam * float(solution.epsilon.sum())
        assert solution.objective == pytest.approx(recomputed, abs=1e-6)

    def test_epsilon_matches_induced_deviation(self):
        problem = random_problem(np.random.default_rng(15), n=10, k=4, r=3, lam=0.6)
        solution = solve_reduced(problem)
        induced = problem.categories.T @ (solution.matrix.values @ problem.position_weights)
        assert np.abs(np.abs(induced - problem.target.probs) - solution.epsilon).max() < 1e-9

    def test_scalarization_monotonicity(self):
        """Relevance and achieved deviation both shrink as lam grows."""
        problem = random_problem(np.random.default_rng(16), n=12, k=5, r=4)
        relevances, deviations = [], []
        for lam in np.linspace(0.0, 1.0, 9):
            solution = solve_reduced(problem.with_lambda(float(lam)))
            relevances.append(float(problem.scores @ solution.matrix.values @ problem.position_weights))
            deviations.append(float(solution.epsilon.sum()))
        assert all(b <= a + 1e-6 for a, b in zip(relevances, relevances[1:]))
        assert all(b <= a + 1e-6 for a, b in zip(deviations, deviations[1:]))

    def test_paper_scale_runtime(self):
        """n=150, k=100, r=20 solves in sub-second territory on stock hardware."""
        from calibrank.data_io import synthetic_instance

        problem = synthetic_instance(99, n=150, k=100, r=20, category_sparsity=0.1, lam=0.5)
        solution = solve_reduced(problem)
        assert solution.solve_time_ms < 2000.0


class TestSanitize:
    def test_identity_on_exact_input(self):
        values = np.array([[0.5, 0.25], [0.25, 0.5], [0.25, 0.25]])
        out = sanitize(values, 1e-8)
        assert np.array_equal(out.values, values)

    def test_clamps_tiny_negative_and_renormalizes(self):
        values = np.array([[1.0 + 1e-10, 0.0], [-1e-10, 1.0]])
        out = sanitize(values, 1e-8)
        assert out.values.min() == 0.0
        assert np.abs(out.values.sum(axis=0) - 1.0).max() < 1e-12
        assert out.values.sum(axis=1).max() <= 1.0 + 1e-12

    def test_rejects_violation_beyond_tolerance(self):
        values = np.array([[1.0, 0.0], [-1e-3, 1.0]])
        with pytest.raises(CorruptSolutionError):
            sanitize(values, 1e-8)
        with pytest.raises(CorruptSolutionError, match="column"):
            sanitize(np.array([[0.9, 0.0], [0.0, 1.0]]), 1e-8)

    def test_shifts_row_excess_without_breaking_columns(self):
        # row 0 dominates column 0, so rescaling alone cannot repair its excess
        values = np.array(
            [
                [1.0 - 1e-9, 5e-9],
                [1e-9, 1.0 - 6e-9],
                [0.0, 1e-9],
            ]
        )
        assert values.sum(axis=1)[0] > 1.0
        out = sanitize(values, 1e-6)
        assert out.values.sum(axis=1).max() <= 1.0 + 1e-12
        assert np.abs(out.values.sum(axis=0) - 1.0).max() < 1e-9
