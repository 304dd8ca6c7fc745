"""Greedy comparison methods and plain score sorting.

Two greedy variants build a ranking one slot at a time, each step picking the
item that maximizes a relevance-minus-divergence objective given the prefix
chosen so far. The simple variant scores a set: unweighted score sum against
the divergence of the unweighted category mixture. The weighted variant scores
an ordered prefix: position-weighted score mass against the divergence of the
position-weighted category mixture, which makes it comparable to the LP
optimizer's objective.

Divergences are smoothed toward the target with a small alpha so that early
prefixes with missing categories stay finite; the same smoothing is applied
to every method.
"""

from __future__ import annotations

import numpy as np

from .core_model import PermutationRanking, RankingProblem
from .metrics import smoothed_kl

GREEDY_SMOOTHING = 0.01


def _score_order(scores: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """Indices from ``pool`` by descending score, ties by lower item index."""
    return pool[np.lexsort((pool, -scores[pool]))]


def score_sort(problem: RankingProblem) -> PermutationRanking:
    """All items by descending score, ties broken by lower index."""
    order = _score_order(problem.scores, np.arange(problem.n))
    return PermutationRanking(order)


def simple_objective(problem: RankingProblem, items, alpha: float = GREEDY_SMOOTHING) -> float:
    """Set objective: (1-lam) * sum of scores - lam * KL(target || mean category row)."""
    items = np.asarray(items, dtype=np.int64)
    mixture = problem.categories[items].mean(axis=0)
    kl = float(smoothed_kl(problem.target.probs, mixture, alpha))
    return (1.0 - problem.lam) * float(problem.scores[items].sum()) - problem.lam * kl


def weighted_objective(problem: RankingProblem, prefix, alpha: float = GREEDY_SMOOTHING) -> float:
    """Prefix objective: position-weighted relevance minus smoothed divergence.

    The category mixture weights each chosen item by its slot's position
    weight, normalized by the exposed weight mass.
    """
    prefix = np.asarray(prefix, dtype=np.int64)
    weights = problem.position_weights[: prefix.size]
    relevance = float(problem.scores[prefix] @ weights)
    mixture = (weights @ problem.categories[prefix]) / weights.sum()
    kl = float(smoothed_kl(problem.target.probs, mixture, alpha))
    return (1.0 - problem.lam) * relevance - problem.lam * kl


def greedy_simple(problem: RankingProblem, alpha: float = GREEDY_SMOOTHING) -> PermutationRanking:
    """Set-selection greedy: grow the chosen set one item at a time.

    Each of the k steps adds the item maximizing the set objective; the
    insertion order is the ranking, and the unchosen items are appended by
    descending score so the result is a full permutation.
    """
    scores, categories, q, lam = problem.scores, problem.categories, problem.target.probs, problem.lam
    used = np.zeros(problem.n, dtype=bool)
    chosen: list[int] = []
    score_total = 0.0
    row_total = np.zeros(problem.r)
    for step in range(problem.k):
        pool = np.flatnonzero(~used)
        relevance = score_total + scores[pool]
        mixtures = (row_total + categories[pool]) / (step + 1)
        objective = (1.0 - lam) * relevance - lam * smoothed_kl(q, mixtures, alpha)
        best = int(pool[int(objective.argmax())])
        chosen.append(best)
        used[best] = True
        score_total += float(scores[best])
        row_total += categories[best]
    tail = _score_order(scores, np.flatnonzero(~used))
    return PermutationRanking(np.concatenate([np.array(chosen, dtype=np.int64), tail]))


def greedy_weighted(problem: RankingProblem, alpha: float = GREEDY_SMOOTHING) -> PermutationRanking:
    """Position-weighted greedy: fill slot i with the best marginal item.

    At slot i the candidate objective is the weighted prefix objective of the
    current prefix extended by the candidate; ties break toward the lower
    item index. Deterministic, and identical to score sorting at lam = 0.
    """
    scores, categories, q, lam = problem.scores, problem.categories, problem.target.probs, problem.lam
    ehat = problem.position_weights
    used = np.zeros(problem.n, dtype=bool)
    chosen: list[int] = []
    weighted_score = 0.0
    weighted_rows = np.zeros(problem.r)
    weight_mass = 0.0
    for step in range(problem.k):
        w = float(ehat[step])
        pool = np.flatnonzero(~used)
        relevance = weighted_score + w * scores[pool]
        mixtures = (weighted_rows + w * categories[pool]) / (weight_mass + w)
        objective = (1.0 - lam) * relevance - lam * smoothed_kl(q, mixtures, alpha)
        best = int(pool[int(objective.argmax())])
        chosen.append(best)
        used[best] = True
        weighted_score += w * float(scores[best])
        weighted_rows += w * categories[best]
        weight_mass += w
    tail = _score_order(scores, np.flatnonzero(~used))
    return PermutationRanking(np.concatenate([np.array(chosen, dtype=np.int64), tail]))
