import itertools

import numpy as np
import pytest

from calibrank.baselines import (
    greedy_simple,
    greedy_weighted,
    score_sort,
    simple_objective,
    weighted_objective,
)
from calibrank.calibration_lp import solve_reduced
from calibrank.core_model import CategoryDistribution, RankingProblem, make_position_weights

from _oracles import random_problem


class TestScoreSort:
    def test_descending_order(self):
        problem = RankingProblem(
            np.array([1.0, 3.0, 2.0]),
            make_position_weights("log", 2),
            np.full((3, 2), 0.5),
            CategoryDistribution(np.array([0.5, 0.5])),
            0.0,
        )
        assert score_sort(problem).assignment.tolist() == [1, 2, 0]

    def test_ties_break_by_index(self):
        problem = RankingProblem(
            np.array([2.0, 2.0, 2.0]),
            make_position_weights("log", 2),
            np.full((3, 2), 0.5),
            CategoryDistribution(np.array([0.5, 0.5])),
            0.0,
        )
        assert score_sort(problem).assignment.tolist() == [0, 1, 2]


class TestGreedyAtEndpoints:
    def test_lambda_zero_equals_score_sort(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            problem = random_problem(rng, n=12, k=6, r=3, lam=0.0)
            expected = score_sort(problem).assignment
            assert np.array_equal(greedy_simple(problem).assignment[:6], expected[:6])
            assert np.array_equal(greedy_weighted(problem).assignment[:6], expected[:6])

    def test_lambda_one_fills_target_category(self):
        """With the target fully on one category, only items of that category are chosen."""
        categories = np.zeros((6, 2))
        categories[:3, 0] = 1.0  # items 0..2 are category 0
        categories[3:, 1] = 1.0
        problem = RankingProblem(
            np.array([0.1, 0.2, 0.3, 9.0, 9.0, 9.0]),  # category-1 items score far higher
            make_position_weights("log", 3),
            categories,
            CategoryDistribution(np.array([1.0, 0.0])),
            1.0,
        )
        assert set(greedy_simple(problem).assignment[:3].tolist()) == {0, 1, 2}
        assert set(greedy_weighted(problem).assignment[:3].tolist()) == {0, 1, 2}

    def test_single_item(self):
        problem = RankingProblem(
            np.array([5.0]),
            np.array([1.0]),
            np.array([[1.0]]),
            CategoryDistribution(np.array([1.0])),
            0.7,
        )
        assert greedy_weighted(problem).assignment.tolist() == [0]


class TestGreedyAgainstExhaustiveOracle:
    def test_simple_never_beats_best_subset(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            problem = random_problem(rng, n=6, k=3, r=3, lam=float(rng.uniform()))
            chosen = greedy_simple(problem).assignment[:3]
            achieved = simple_objective(problem, chosen)
            best = max(
                simple_objective(problem, subset) for subset in itertools.combinations(range(6), 3)
            )
            assert achieved <= best + 1e-9

    def test_weighted_never_beats_best_ordering(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            problem = random_problem(rng, n=6, k=3, r=3, lam=float(rng.uniform()))
            prefix = greedy_weighted(problem).assignment[:3]
            achieved = weighted_objective(problem, prefix)
            best = max(
                weighted_objective(problem, order) for order in itertools.permutations(range(6), 3)
            )
            assert achieved <= best + 1e-9

    def test_lp_dominates_greedy_in_linear_deviation(self):
        """The LP optimum bounds the greedy ranking's own linear-deviation objective."""
        rng = np.random.default_rng(3)
        for _ in range(10):
            problem = random_problem(rng, n=6, k=3, r=3, lam=float(rng.uniform()))
            prefix = greedy_weighted(problem).assignment[:3]
            ehat = problem.position_weights
            relevance = float(problem.scores[prefix] @ ehat)
            induced = problem.categories[prefix].T @ ehat
            deviation = float(np.abs(induced - problem.target.probs).sum())
            greedy_value = (1 - problem.lam) * relevance - problem.lam * deviation
            assert solve_reduced(problem).objective >= greedy_value - 1e-6


class TestDeterminism:
    def test_repeated_runs_are_identical(self):
        problem = random_problem(np.random.default_rng(4), n=15, k=8, r=4, lam=0.6)
        for method in (greedy_simple, greedy_weighted, score_sort):
            first = method(problem).assignment
            second = method(problem).assignment
            assert np.array_equal(first, second)

    def test_full_permutation_returned(self):
        problem = random_problem(np.random.default_rng(5), n=9, k=4, r=3, lam=0.5)
        for method in (greedy_simple, greedy_weighted, score_sort):
            assert sorted(method(problem).assignment.tolist()) == list(range(9))
