"""Pipeline orchestration: single instances, trade-off sweeps, benchmarks.

A sweep evaluates one method over a grid of trade-off weights and a corpus of
per-user instances, producing one CSV row per weight with means and standard
errors of expected relevance, NDCG@k, MRR, smoothed KL and L1 deviation.
Stochastic policies are scored exactly over their decomposition components
(weight-averaged), never by sampling, so sweep output is deterministic for a
fixed seed and config.

Timing columns are kept out of the sweep CSV by default (wall-clock values
would break byte-for-byte reproducibility); opt in with ``with_times`` or use
``bench`` for runtime reporting.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import time

import numpy as np

from . import baselines
from .bvn import augment_and_get_ds, bvn_decompose, drop_zero_rows, sample
from .calibration_lp import LpSolution, solve_full, solve_reduced
from .core_model import PermutationRanking, RankingPolicy, RankingProblem, make_position_weights
from .data_io import (
    UserEvalInstance,
    build_candidates,
    build_genre_matrix,
    build_popularity_matrix,
    build_target_distribution,
    build_year_matrix,
    load_category_file,
    load_interactions,
    load_scores,
    split_history_holdout,
    split_users,
    synthetic_instance,
)
from .metrics import (
    expected_kl_of_policy,
    expected_relevance,
    induced_distribution,
    kl_divergence,
    l1_deviation,
    mrr,
    ndcg_at_k,
)

METHODS = ("excalibr_full", "excalibr_reduced", "greedy_simple", "greedy_weighted", "score_sort")
LP_METHODS = ("excalibr_full", "excalibr_reduced")
CATEGORY_SOURCES = ("genre", "year", "popularity", "file", "synthetic")

DEFAULT_LAMBDA_GRID = tuple(round(0.05 * i, 2) for i in range(21))

CSV_COLUMNS = (
    "lambda",
    "mean_relevance",
    "stderr_relevance",
    "mean_ndcg",
    "stderr_ndcg",
    "mean_mrr",
    "stderr_mrr",
    "mean_kl",
    "stderr_kl",
    "mean_l1",
    "stderr_l1",
)
CSV_TIME_COLUMNS = ("lp_time_ms", "bvn_time_ms", "total_time_ms")


@dataclasses.dataclass(frozen=True)
class PhaseTimings:
    lp_ms: float
    bvn_ms: float
    total_ms: float


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    """Sampled ranking plus the policy and solver artifacts behind it."""

    ranking: PermutationRanking
    policy: RankingPolicy
    solution: LpSolution | None
    timings: PhaseTimings


def run_pipeline(problem: RankingProblem, method: str, seed) -> PipelineResult:
    """Execute one method end to end on a single instance.

    The LP methods solve, prune, augment, decompose, then sample with the
    given seed; the deterministic methods wrap their ranking as a
    single-component policy. Identical seeds reproduce identical outputs.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    start = time.perf_counter()
    if method in LP_METHODS:
        if method == "excalibr_reduced":
            solution = solve_reduced(problem)
            lp_done = time.perf_counter()
            kept = drop_zero_rows(solution.matrix)
            policy = bvn_decompose(augment_and_get_ds(kept))
        else:
            solution = solve_full(problem)
            lp_done = time.perf_counter()
            policy = bvn_decompose(solution.matrix)
        bvn_done = time.perf_counter()
        ranking = sample(policy, seed)
        timings = PhaseTimings(
            lp_ms=(lp_done - start) * 1e3,
            bvn_ms=(bvn_done - lp_done) * 1e3,
            total_ms=(time.perf_counter() - start) * 1e3,
        )
        return PipelineResult(ranking=ranking, policy=policy, solution=solution, timings=timings)

    if method == "greedy_simple":
        ranking = baselines.greedy_simple(problem)
    elif method == "greedy_weighted":
        ranking = baselines.greedy_weighted(problem)
    else:
        ranking = baselines.score_sort(problem)
    policy = RankingPolicy(((1.0, ranking),))
    timings = PhaseTimings(lp_ms=0.0, bvn_ms=0.0, total_ms=(time.perf_counter() - start) * 1e3)
    return PipelineResult(ranking=ranking, policy=policy, solution=None, timings=timings)


@dataclasses.dataclass(frozen=True)
class EvalCase:
    """One evaluation instance: the problem plus its relevant item rows."""

    label: str
    problem: RankingProblem
    relevant: frozenset[int]
    seed: tuple


@dataclasses.dataclass(frozen=True)
class UserMetrics:
    relevance: float
    ndcg: float
    mrr: float
    kl: float
    l1: float
    objective: float | None
    timings: PhaseTimings


def evaluate_case(case: EvalCase, method: str, lam: float, alpha: float) -> UserMetrics:
    """Run one method on one instance at one trade-off weight and score it.

    LP methods report expected quantities: relevance and L1 deviation come
    from the optimized matrix itself (identical to the policy expectation),
    while NDCG, MRR and KL are weight-averaged over the policy components.
    """
    problem = case.problem.with_lambda(lam)
    ehat = problem.position_weights
    result = run_pipeline(problem, method, case.seed)
    k = problem.k
    if method in LP_METHODS:
        matrix = result.solution.matrix
        relevance = expected_relevance(problem.scores, matrix, ehat)
        l1 = float(result.solution.epsilon.sum())
        kl = expected_kl_of_policy(result.policy, problem.categories, ehat, problem.target, alpha)
        ndcg_value = sum(t * ndcg_at_k(perm, case.relevant, k) for t, perm in result.policy.components)
        mrr_value = sum(t * mrr(perm, case.relevant, k) for t, perm in result.policy.components)
        objective = result.solution.objective
    else:
        ranking = result.ranking
        relevance = expected_relevance(problem.scores, ranking, ehat)
        induced = induced_distribution(problem.categories, ranking, ehat)
        l1 = l1_deviation(problem.target, induced)
        kl = kl_divergence(problem.target, induced, alpha)
        ndcg_value = ndcg_at_k(ranking, case.relevant, k)
        mrr_value = mrr(ranking, case.relevant, k)
        objective = None
    return UserMetrics(
        relevance=relevance,
        ndcg=ndcg_value,
        mrr=mrr_value,
        kl=kl,
        l1=l1,
        objective=objective,
        timings=result.timings,
    )


@dataclasses.dataclass(frozen=True)
class TradeoffPoint:
    """One sweep row: means and standard errors at a single trade-off weight.

    ``mean_objective`` is carried for LP methods (it is not a CSV column) so
    the scalarization identity can be checked without re-solving.
    """

    lam: float
    mean_relevance: float
    stderr_relevance: float
    mean_ndcg: float
    stderr_ndcg: float
    mean_mrr: float
    stderr_mrr: float
    mean_kl: float
    stderr_kl: float
    mean_l1: float
    stderr_l1: float
    lp_time_ms: float
    bvn_time_ms: float
    total_time_ms: float
    mean_objective: float | None = None

    def __post_init__(self):
        for name in ("stderr_relevance", "stderr_ndcg", "stderr_mrr", "stderr_kl", "stderr_l1"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} is negative")
        if self.total_time_ms + 1e-6 < self.lp_time_ms + self.bvn_time_ms:
            raise ValueError("total time below the sum of its phases")


def _mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / np.sqrt(arr.size))


def _evaluate_job(args):
    case, method, lam, alpha = args
    return evaluate_case(case, method, lam, alpha)


def sweep_cases(
    cases,
    method: str,
    lambda_grid,
    alpha: float,
    workers: int = 1,
) -> list[TradeoffPoint]:
    """Evaluate a method over instances x trade-off grid, one point per weight.

    Instances may be processed in parallel; aggregation is an ordered
    reduction over the case list, so results do not depend on scheduling.
    """
    if not cases:
        raise ValueError("no evaluation instances")
    points = []
    executor = None
    try:
        if workers > 1:
            executor = concurrent.futures.ProcessPoolExecutor(max_workers=workers)
        for lam in lambda_grid:
            jobs = [(case, method, lam, alpha) for case in cases]
            if executor is None:
                results = [_evaluate_job(job) for job in jobs]
            else:
                results = list(executor.map(_evaluate_job, jobs))
            rel, rel_se = _mean_stderr([m.relevance for m in results])
            ndcg, ndcg_se = _mean_stderr([m.ndcg for m in results])
            mrr_mean, mrr_se = _mean_stderr([m.mrr for m in results])
            kl, kl_se = _mean_stderr([m.kl for m in results])
            l1, l1_se = _mean_stderr([m.l1 for m in results])
            objective = None
            if method in LP_METHODS:
                objective = float(np.mean([m.objective for m in results]))
            points.append(
                TradeoffPoint(
                    lam=float(lam),
                    mean_relevance=rel,
                    stderr_relevance=rel_se,
                    mean_ndcg=ndcg,
                    stderr_ndcg=ndcg_se,
                    mean_mrr=mrr_mean,
                    stderr_mrr=mrr_se,
                    mean_kl=kl,
                    stderr_kl=kl_se,
                    mean_l1=l1,
                    stderr_l1=l1_se,
                    lp_time_ms=float(np.mean([m.timings.lp_ms for m in results])),
                    bvn_time_ms=float(np.mean([m.timings.bvn_ms for m in results])),
                    total_time_ms=float(np.mean([m.timings.total_ms for m in results])),
                    mean_objective=objective,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def points_to_csv(points, with_times: bool = False) -> str:
    """Render sweep points with the documented stable header.

    Values use 12 significant digits; timing columns are optional because
    they are not reproducible byte-for-byte.
    """
    columns = CSV_COLUMNS + (CSV_TIME_COLUMNS if with_times else ())
    lines = [",".join(columns)]
    for point in points:
        row = [
            point.lam,
            point.mean_relevance,
            point.stderr_relevance,
            point.mean_ndcg,
            point.stderr_ndcg,
            point.mean_mrr,
            point.stderr_mrr,
            point.mean_kl,
            point.stderr_kl,
            point.mean_l1,
            point.stderr_l1,
        ]
        if with_times:
            row += [point.lp_time_ms, point.bvn_time_ms, point.total_time_ms]
        lines.append(",".join(f"{value:.12g}" for value in row))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Sweep configuration


@dataclasses.dataclass
class SweepConfig:
    """Everything a sweep or benchmark needs; see ``parse_config`` for files.

    ``category_source`` selects how the membership matrix is built: from item
    genres, release decades, popularity tiers, an explicit membership file,
    or seeded synthetic instances (no data files needed).
    """

    method: str = "excalibr_reduced"
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    position_weight_kind: str = "log"
    n: int = 60
    k: int = 40
    category_source: str = "synthetic"
    interactions: str | None = None
    items: str | None = None
    scores: str | None = None
    categories: str | None = None
    output: str | None = None
    seed: int = 0
    alpha: float = 0.01
    positive_threshold: float = 3.5
    min_interactions: int = 5
    history_frac: float = 0.8
    train_frac: float | None = None
    val_user_count: int = 0
    test_user_count: int = 0
    max_users: int = 0
    popularity_top_frac: float = 0.05
    workers: int = 1
    with_times: bool = False
    synthetic_users: int = 50
    synthetic_categories: int = 8
    synthetic_sparsity: float = 0.25
    score_distribution: str = "normal"
    bench_methods: tuple = METHODS

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.category_source not in CATEGORY_SOURCES:
            raise ValueError(f"unknown category source {self.category_source!r}")
        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise ValueError("lambda_grid is empty")
        if any(not 0.0 <= v <= 1.0 for v in grid):
            raise ValueError("lambda_grid values must lie in [0, 1]")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be sorted ascending")
        if self.k < 1 or self.n < self.k:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.category_source != "synthetic":
            if not self.interactions or not self.scores:
                raise ValueError(f"category source {self.category_source!r} needs interactions and scores paths")
            if self.category_source in ("genre", "year") and not self.items:
                raise ValueError(f"category source {self.category_source!r} needs an items path")
            if self.category_source == "file" and not self.categories:
                raise ValueError("category source 'file' needs a categories path")
        for name in self.bench_methods:
            if name not in METHODS:
                raise ValueError(f"unknown bench method {name!r}")


_CONFIG_PARSERS = {
    "method": str,
    "lambda_grid": lambda text: tuple(float(v) for v in text.split(",") if v.strip()),
    "position_weight_kind": str,
    "n": int,
    "k": int,
    "category_source": str,
    "interactions": str,
    "items": str,
    "scores": str,
    "categories": str,
    "output": str,
    "seed": int,
    "alpha": float,
    "positive_threshold": float,
    "min_interactions": int,
    "history_frac": float,
    "train_frac": float,
    "val_user_count": int,
    "test_user_count": int,
    "max_users": int,
    "popularity_top_frac": float,
    "workers": int,
    "with_times": lambda text: text.strip().lower() in ("1", "true", "yes", "on"),
    "synthetic_users": int,
    "synthetic_categories": int,
    "synthetic_sparsity": float,
    "score_distribution": str,
    "bench_methods": lambda text: tuple(v.strip() for v in text.split(",") if v.strip()),
}

CONFIG_KEYS = tuple(_CONFIG_PARSERS)


def parse_config(path) -> dict[str, str]:
    """Flat ``key = value`` config file; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            values[key] = value
    return values


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> SweepConfig:
    """Build a validated config from file values with CLI overrides on top."""
    config = SweepConfig()
    merged: dict[str, str] = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, text in merged.items():
        if key not in _CONFIG_PARSERS:
            raise ValueError(f"unknown config key {key!r}")
        setattr(config, key, _CONFIG_PARSERS[key](text) if isinstance(text, str) else text)
    config.lambda_grid = tuple(float(v) for v in config.lambda_grid)
    config.validate()
    return config


# --------------------------------------------------------------------------
# Corpus assembly


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def build_synthetic_cases(config: SweepConfig) -> list[EvalCase]:
    """Seeded synthetic corpus; relevant items are drawn score-biased.

    Sampling relevance proportionally to the score softmax keeps NDCG and MRR
    informative: better-scored items are more likely to be held out.
    """
    cases = []
    for i in range(config.synthetic_users):
        problem = synthetic_instance(
            (config.seed, i),
            n=config.n,
            k=config.k,
            r=config.synthetic_categories,
            score_distribution=config.score_distribution,
            category_sparsity=config.synthetic_sparsity,
            weight_kind=config.position_weight_kind,
            lam=0.0,
        )
        rng = np.random.default_rng((config.seed, i, 1))
        count = max(1, config.n // 10)
        relevant = rng.choice(config.n, size=count, replace=False, p=_softmax(problem.scores))
        cases.append(
            EvalCase(
                label=f"synthetic-{i}",
                problem=problem,
                relevant=frozenset(int(v) for v in relevant),
                seed=(config.seed, i, 2),
            )
        )
    return cases


def build_file_cases(config: SweepConfig) -> list[EvalCase]:
    """Assemble evaluation instances from interaction/score/category files.

    With ``test_user_count`` > 0 the seeded user split is applied and only
    test users are evaluated (popularity counts then use train users only);
    otherwise every eligible user is evaluated. Users need at least two
    positives and at least one scored non-history candidate.
    """
    dataset = load_interactions(
        config.interactions,
        positive_threshold=config.positive_threshold,
        min_interactions=config.min_interactions,
        items_path=config.items,
    )
    train_users = None
    if config.test_user_count > 0:
        train_users, _, test_users = split_users(
            dataset, config.train_frac, config.val_user_count, config.test_user_count, config.seed
        )
        eval_users = sorted(test_users)
    else:
        eval_users = sorted(dataset.users)

    if config.category_source == "genre":
        matrix = build_genre_matrix(dataset.items)
    elif config.category_source == "year":
        matrix = build_year_matrix(dataset.items)
    elif config.category_source == "popularity":
        matrix = build_popularity_matrix(dataset, config.popularity_top_frac, train_users=train_users)
    else:
        matrix = load_category_file(config.categories)

    score_table = load_scores(config.scores, catalog=dataset.items)
    cases = []
    for user in eval_users:
        if config.max_users and len(cases) >= config.max_users:
            break
        positives = dataset.positives(user)
        if len(positives) < 2 or user not in score_table:
            continue
        history, holdout = split_history_holdout(positives, config.history_frac, (config.seed, user))
        candidates, candidate_scores = build_candidates(score_table[user], history, config.n)
        if not candidates:
            continue
        instance = UserEvalInstance(
            user=user,
            history=history,
            holdout=holdout,
            candidate_items=candidates,
            candidate_scores=candidate_scores,
        )
        k = min(config.k, len(candidates))
        problem = RankingProblem(
            scores=instance.candidate_scores,
            position_weights=make_position_weights(config.position_weight_kind, k),
            categories=matrix.rows_for(instance.candidate_items),
            target=build_target_distribution(instance.history, matrix),
            lam=0.0,
        )
        relevant = frozenset(row for row, item in enumerate(instance.candidate_items) if item in instance.holdout)
        cases.append(EvalCase(label=f"user-{user}", problem=problem, relevant=relevant, seed=(config.seed, user)))
    if not cases:
        raise ValueError("no evaluable users after filtering")
    return cases


def build_cases(config: SweepConfig) -> list[EvalCase]:
    if config.category_source == "synthetic":
        return build_synthetic_cases(config)
    return build_file_cases(config)


def run_sweep(config: SweepConfig) -> list[TradeoffPoint]:
    """Full sweep per the config; writes the CSV when an output path is set."""
    config.validate()
    cases = build_cases(config)
    points = sweep_cases(cases, config.method, config.lambda_grid, config.alpha, workers=config.workers)
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as handle:
            handle.write(points_to_csv(points, with_times=config.with_times))
    return points


# --------------------------------------------------------------------------
# Benchmarks


@dataclasses.dataclass(frozen=True)
class BenchRow:
    method: str
    mean_s: float
    stderr_s: float
    lp_s: float
    bvn_s: float
    runs: int


@dataclasses.dataclass(frozen=True)
class BenchReport:
    """Per-method runtime table with the LP/decomposition breakdown."""

    rows: tuple[BenchRow, ...]
    lambda_grid: tuple
    shape: str
    backend: str

    def row(self, method: str) -> BenchRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)

    @property
    def reduced_vs_full_drop_pct(self) -> float | None:
        try:
            full = self.row("excalibr_full")
            reduced = self.row("excalibr_reduced")
        except KeyError:
            return None
        if full.mean_s <= 0.0:
            return None
        return 100.0 * (full.mean_s - reduced.mean_s) / full.mean_s

    def render_text(self) -> str:
        lines = [
            f"# runtime per user in seconds; instances {self.shape}",
            f"# lambda grid: {', '.join(f'{v:g}' for v in self.lambda_grid)}",
            f"# kernel backend: {self.backend}",
            f"{'method':<18}{'total (s)':>14}{'stderr':>10}{'lp (s)':>10}{'bvn (s)':>10}",
        ]
        for row in self.rows:
            lines.append(
                f"{row.method:<18}{row.mean_s:>14.4f}{row.stderr_s:>10.4f}{row.lp_s:>10.4f}{row.bvn_s:>10.4f}"
            )
        drop = self.reduced_vs_full_drop_pct
        if drop is not None:
            lines.append(f"reduced vs full: {drop:.1f}% total-time drop")
        return "\n".join(lines) + "\n"


def benchmark(config: SweepConfig) -> BenchReport:
    """Time every benchmark method over instances x trade-off grid.

    Each (instance, lambda) run is one timing sample; rows report mean and
    standard error per run with the LP/decomposition phase breakdown.
    """
    from . import kernels

    config.validate()
    cases = build_cases(config)
    rows = []
    for method in config.bench_methods:
        totals, lps, bvns = [], [], []
        for lam in config.lambda_grid:
            for case in cases:
                result = run_pipeline(case.problem.with_lambda(lam), method, case.seed)
                totals.append(result.timings.total_ms / 1e3)
                lps.append(result.timings.lp_ms / 1e3)
                bvns.append(result.timings.bvn_ms / 1e3)
        mean_s, stderr_s = _mean_stderr(totals)
        rows.append(
            BenchRow(
                method=method,
                mean_s=mean_s,
                stderr_s=stderr_s,
                lp_s=float(np.mean(lps)),
                bvn_s=float(np.mean(bvns)),
                runs=len(totals),
            )
        )
    shape = f"n={config.n}, k={config.k}, source={config.category_source}, users={len(cases)}"
    return BenchReport(rows=tuple(rows), lambda_grid=tuple(config.lambda_grid), shape=shape, backend=kernels.BACKEND_NAME)
