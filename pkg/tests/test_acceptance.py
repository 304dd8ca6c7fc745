"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. Tolerances are fixed here, not tuned at runtime.
"""

import contextlib
import math
import subprocess
import sys

import numpy as np
import pytest

from calibrank.baselines import greedy_weighted
from calibrank.bvn import augment_and_get_ds, bvn_decompose, expected_matrix, sample
from calibrank.calibration_lp import solve_full, solve_reduced
from calibrank.core_model import (
    CategoryDistribution,
    DoublyStochasticMatrix,
    PartialStochasticMatrix,
    PermutationRanking,
    RankingPolicy,
    make_position_weights,
)
from calibrank.harness import SweepConfig, benchmark, build_cases, sweep_cases
from calibrank.metrics import induced_distribution, kl_divergence

from _oracles import enumerate_topk, random_doubly_stochastic, random_problem

# Induced-distribution checks are accumulated while criteria 2-5 run and
# asserted once by criterion 6.
_LEMMA3 = {"checks": 0, "worst_sum": 0.0, "worst_neg": 0.0}


def _note_induced(categories, ranking, weights):
    induced = induced_distribution(categories, ranking, weights)
    _LEMMA3["checks"] += 1
    _LEMMA3["worst_sum"] = max(_LEMMA3["worst_sum"], abs(float(induced.probs.sum()) - 1.0))
    _LEMMA3["worst_neg"] = max(_LEMMA3["worst_neg"], -float(induced.probs.min()))


@contextlib.contextmanager
def report(name):
    try:
        yield
    except Exception:
        print(f"{name}: FAIL")
        raise
    print(f"{name}: PASS")


def test_criterion_1_position_weight_mass():
    with report("criterion 1 (position-weight mass profile)"):
        expectations = {
            "log": (0.14, 0.216),
            "sqrt": (0.17, 0.27),
            "reciprocal": (0.44, 0.56),
        }
        for kind, (top5, top10) in expectations.items():
            weights = make_position_weights(kind, 100)
            assert abs(weights[:5].sum() - top5) <= 0.01, kind
            assert abs(weights[:10].sum() - top10) <= 0.01, kind


def test_criterion_2_lp_relaxation_dominance():
    with report("criterion 2 (LP dominates exhaustive top-k orderings)"):
        rng = np.random.default_rng(2024)
        lambdas = (0.0, 0.25, 0.5, 0.75, 1.0)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            k = int(rng.integers(1, min(n, 5) + 1))
            r = int(rng.integers(2, 5))
            problem = random_problem(rng, n=n, k=k, r=r)
            relevances, deviations = enumerate_topk(problem)
            for lam in lambdas:
                solution = solve_reduced(problem.with_lambda(lam))
                best = float(((1.0 - lam) * relevances - lam * deviations).max())
                assert solution.objective >= best - 1e-6, (n, k, r, lam)
                if lam == 0.0:
                    assert abs(solution.objective - best) <= 1e-6
                _note_induced(problem.categories, solution.matrix, problem.position_weights)


def test_criterion_3_full_reduced_equivalence():
    with report("criterion 3 (full and reduced optima agree)"):
        rng = np.random.default_rng(33)
        for _ in range(100):
            n = int(rng.integers(3, 31))
            k = int(rng.integers(1, min(n, 10) + 1))
            r = int(rng.integers(2, 7))
            problem = random_problem(rng, n=n, k=k, r=r, lam=float(rng.uniform()))
            reduced = solve_reduced(problem)
            full = solve_full(problem)
            assert abs(reduced.objective - full.objective) <= 1e-6, (n, k, r)
            _note_induced(problem.categories, full.matrix, problem.position_weights)


def test_criterion_4_bvn_round_trip():
    with report("criterion 4 (decomposition round-trip)"):
        rng = np.random.default_rng(44)
        categories = rng.dirichlet(np.ones(3), size=25)
        for _ in range(500):
            m = int(rng.integers(2, 26))
            matrix = DoublyStochasticMatrix(random_doubly_stochastic(rng, m), tuple(range(m)))
            policy = bvn_decompose(matrix)
            assert len(policy) <= (m - 1) ** 2 + 1
            assert abs(float(policy.thetas.sum()) - 1.0) <= 1e-9
            recon = expected_matrix(policy)
            assert np.abs(recon.values - matrix.values).max() <= 1e-6
            weights = np.sort(rng.dirichlet(np.ones(m)))[::-1]
            _note_induced(categories[:m], policy.components[0][1], weights)
            _note_induced(categories[:m], matrix, weights)


def test_criterion_5_augmentation_correctness():
    with report("criterion 5 (augmentation to doubly stochastic)"):
        rng = np.random.default_rng(55)
        categories = rng.dirichlet(np.ones(4), size=30)
        for _ in range(1000):
            m = int(rng.integers(2, 31))
            k = int(rng.integers(1, m + 1))
            values = random_doubly_stochastic(rng, m)[:, :k]
            partial = PartialStochasticMatrix(values, tuple(range(m)))
            out = augment_and_get_ds(partial)
            assert np.array_equal(out.values[:, :k], values)
            assert np.abs(out.values.sum(axis=0) - 1.0).max() <= 1e-9
            assert np.abs(out.values.sum(axis=1) - 1.0).max() <= 1e-9
            assert float(out.values.min()) >= 0.0
            weights = np.sort(rng.dirichlet(np.ones(k)))[::-1]
            _note_induced(categories[:m], partial, weights)


def test_criterion_6_induced_distribution_property():
    with report("criterion 6 (induced distributions are distributions)"):
        assert _LEMMA3["checks"] >= 1800, "criteria 2-5 must run first"
        assert _LEMMA3["worst_sum"] <= 1e-9
        assert _LEMMA3["worst_neg"] <= 1e-9


def test_criterion_7_jensen_bound():
    with report("criterion 7 (expected divergence upper-bounds point divergence)"):
        rng = np.random.default_rng(77)
        for _ in range(100):
            m, r = int(rng.integers(3, 12)), int(rng.integers(2, 5))
            # strictly positive rows keep every per-component distribution positive
            categories = rng.dirichlet(np.ones(r), size=m) * 0.7 + 0.3 / r
            categories /= categories.sum(axis=1, keepdims=True)
            target = CategoryDistribution(rng.dirichlet(np.ones(r)))
            weights = np.sort(rng.dirichlet(np.ones(m)))[::-1]
            matrix = DoublyStochasticMatrix(random_doubly_stochastic(rng, m), tuple(range(m)))
            policy = bvn_decompose(matrix)
            expectation = 0.0
            for theta, perm in policy.components:
                component = induced_distribution(categories, perm, weights)
                assert float(component.probs.min()) > 0.0
                expectation += theta * kl_divergence(target, component, 0.0)
            point = kl_divergence(target, induced_distribution(categories, matrix, weights), 0.0)
            assert point <= expectation + 1e-9


def test_criterion_8_sampling_soundness():
    with report("criterion 8 (sampling frequencies match weights)"):
        perms = (
            PermutationRanking(np.array([0, 1, 2])),
            PermutationRanking(np.array([1, 2, 0])),
            PermutationRanking(np.array([2, 0, 1])),
        )
        thetas = (0.2, 0.3, 0.5)
        policy = RankingPolicy(tuple(zip(thetas, perms)))
        draws = 100_000
        counts = np.zeros(3)
        for seed in range(draws):
            chosen = sample(policy, seed)
            counts[int(chosen.assignment[0])] += 1  # first item identifies the component
        frequencies = counts / draws
        for freq, theta in zip(frequencies, thetas):
            sigma = math.sqrt(theta * (1 - theta) / draws)
            assert abs(freq - theta) <= 3 * sigma, (freq, theta)


DESK_CONFIG = SweepConfig(
    category_source="synthetic",
    synthetic_users=50,
    n=60,
    k=40,
    synthetic_categories=8,
    seed=1109,
)


@pytest.fixture(scope="module")
def desk_scale_sweeps():
    cases = build_cases(DESK_CONFIG)
    lp_points = sweep_cases(cases, "excalibr_reduced", DESK_CONFIG.lambda_grid, DESK_CONFIG.alpha)
    greedy_points = sweep_cases(cases, "greedy_weighted", DESK_CONFIG.lambda_grid, DESK_CONFIG.alpha)
    return lp_points, greedy_points


def test_criterion_9_tradeoff_dominance(desk_scale_sweeps):
    with report("criterion 9 (optimizer curve dominates weighted greedy)"):
        lp_points, greedy_points = desk_scale_sweeps
        for greedy in greedy_points:
            dominated = any(
                lp.mean_relevance >= greedy.mean_relevance - 1e-6
                and lp.mean_l1 <= greedy.mean_l1 + 1e-6
                for lp in lp_points
            )
            assert dominated, (greedy.lam, greedy.mean_relevance, greedy.mean_l1)


def test_criterion_10_scalarization_monotonicity(desk_scale_sweeps):
    with report("criterion 10 (relevance and deviation shrink with lambda)"):
        lp_points, _ = desk_scale_sweeps
        relevance = [p.mean_relevance for p in lp_points]
        deviation = [p.mean_l1 for p in lp_points]
        assert all(b <= a + 1e-6 for a, b in zip(relevance, relevance[1:]))
        assert all(b <= a + 1e-6 for a, b in zip(deviation, deviation[1:]))


def test_criterion_11_runtime_structure():
    with report("criterion 11 (LP dominates runtime; reduced form is faster)"):
        config = SweepConfig(
            category_source="synthetic",
            synthetic_users=5,
            n=150,
            k=100,
            synthetic_categories=20,
            synthetic_sparsity=0.1,
            lambda_grid=(0.3, 0.7),
            bench_methods=("excalibr_reduced", "excalibr_full"),
            seed=2211,
        )
        rep = benchmark(config)
        reduced = rep.row("excalibr_reduced")
        full = rep.row("excalibr_full")
        assert reduced.lp_s > reduced.bvn_s
        assert reduced.mean_s < full.mean_s
        drop = rep.reduced_vs_full_drop_pct
        print(f"  reduced {reduced.mean_s:.2f}s/user (lp {reduced.lp_s:.2f}, bvn {reduced.bvn_s:.3f}); "
              f"full {full.mean_s:.2f}s/user; drop {drop:.1f}%")


def test_criterion_12_sweep_determinism(tmp_path):
    with report("criterion 12 (byte-identical sweep output)"):
        config = tmp_path / "sweep.cfg"
        config.write_text(
            "category_source = synthetic\n"
            "synthetic_users = 8\n"
            "n = 20\nk = 8\nsynthetic_categories = 4\n"
            "lambda_grid = 0,0.5,1\n"
            "seed = 7\n"
        )
        outputs = []
        for run in range(2):
            out = tmp_path / f"curve-{run}.csv"
            result = subprocess.run(
                [sys.executable, "-m", "calibrank.cli", "sweep", "--config", str(config), "--output", str(out)],
                capture_output=True,
                text=True,
                timeout=600,
            )
            assert result.returncode == 0, result.stderr
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
