"""Calibrated re-ranking toolkit.

Trades ranking relevance against deviation from a target category
distribution: a linear program optimizes a stochastic item/slot matrix, which
is realized as a sampling policy over permutations via Birkhoff-von Neumann
decomposition. Greedy baselines, evaluation metrics, dataset preparation and
a sweep/benchmark harness round out the package.
"""

from .baselines import greedy_simple, greedy_weighted, score_sort
from .bvn import (
    DecompositionError,
    augment_and_get_ds,
    bvn_decompose,
    drop_zero_rows,
    expected_matrix,
    read_policy,
    sample,
    write_policy,
)
from .calibration_lp import (
    CorruptSolutionError,
    LpSolution,
    SolverFailureError,
    sanitize,
    solve_full,
    solve_reduced,
)
from .core_model import (
    CategoryDistribution,
    DoublyStochasticMatrix,
    PartialStochasticMatrix,
    PermutationRanking,
    RankingPolicy,
    RankingProblem,
    make_position_weights,
    validate_problem,
)
from .data_io import (
    EmptyDatasetError,
    InteractionDataset,
    ParseError,
    UserEvalInstance,
    build_candidates,
    build_genre_matrix,
    build_popularity_matrix,
    build_target_distribution,
    build_year_matrix,
    load_interactions,
    load_problem,
    load_scores,
    split_history_holdout,
    split_users,
    synthetic_instance,
)
from .harness import (
    SweepConfig,
    TradeoffPoint,
    benchmark,
    make_config,
    parse_config,
    run_pipeline,
    run_sweep,
)
from .kernels import BACKEND_NAME as KERNEL_BACKEND
from .metrics import (
    expected_kl_of_policy,
    expected_relevance,
    induced_distribution,
    kl_divergence,
    l1_deviation,
    mrr,
    ndcg_at_k,
)

__version__ = "0.1.0"
