"""Evaluation quantities for calibrated rankings.

The central object is the induced category distribution A' P e: the expected
exposure each category receives under a (possibly stochastic) ranking with
position weights e. Relevance, KL divergence and L1 deviation are all
evaluated against it, alongside the usual NDCG@k and MRR ranking metrics.
"""

from __future__ import annotations

import numpy as np

from .core_model import (
    CategoryDistribution,
    DoublyStochasticMatrix,
    PartialStochasticMatrix,
    PermutationRanking,
    RankingPolicy,
)


def _aligned_weights(weights, size: int) -> np.ndarray:
    """Pad position weights with zero-exposure slots up to ``size`` entries."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("position weights must be 1-D")
    if w.size == size:
        return w
    if w.size < size:
        return np.concatenate([w, np.zeros(size - w.size)])
    tail = w[size:]
    if np.any(tail != 0.0):
        raise ValueError(f"{w.size} position weights for {size} slots with non-zero tail")
    return w[:size]


def _probs(dist) -> np.ndarray:
    if isinstance(dist, CategoryDistribution):
        return dist.probs
    return np.asarray(dist, dtype=np.float64)


def smoothed_kl(q, p, alpha: float):
    """KL(q || (1-alpha) p + alpha q) with the convention 0 log 0 = 0.

    Broadcasts over leading axes of ``p`` so a batch of candidate mixtures can
    be scored in one call. With ``alpha`` = 0 and a zero coordinate of ``p``
    carrying target mass, the divergence is +inf (returned, not raised).
    """
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    mixed = np.maximum((1.0 - alpha) * p + alpha * q, 0.0)
    support = q > 0.0
    qs = q[support]
    with np.errstate(divide="ignore"):
        logs = np.log(mixed[..., support])
        vals = (qs * (np.log(qs) - logs)).sum(axis=-1)
    return vals


def kl_divergence(q, p, alpha: float = 0.0) -> float:
    """Divergence of ``p`` from the target ``q``, optionally smoothed toward q."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"smoothing alpha must lie in [0, 1), got {alpha}")
    qp, pp = _probs(q), _probs(p)
    if qp.shape != pp.shape:
        raise ValueError(f"distribution lengths differ: {qp.size} vs {pp.size}")
    value = float(smoothed_kl(qp, pp, alpha))
    if np.isinf(value):
        return value
    # Mathematically non-negative; clamp float dust.
    return max(0.0, value)


def l1_deviation(q, p) -> float:
    """Total variation style deviation sum |q_i - p_i|."""
    qp, pp = _probs(q), _probs(p)
    if qp.shape != pp.shape:
        raise ValueError(f"distribution lengths differ: {qp.size} vs {pp.size}")
    return float(np.abs(qp - pp).sum())


def induced_distribution(categories: np.ndarray, ranking, weights) -> CategoryDistribution:
    """Expected category exposure A' P e of a ranking under position weights.

    ``ranking`` may be a doubly stochastic matrix, a partial (column
    stochastic) matrix, or a permutation; item identifiers index rows of
    ``categories``. Weights shorter than the ranking are padded with zeros
    (slots past the shown prefix carry no exposure).
    """
    a = np.asarray(categories, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("categories must be a 2-D matrix")
    if isinstance(ranking, DoublyStochasticMatrix):
        rows = np.asarray(ranking.item_map)
        _check_ids(rows, a.shape[0])
        w = _aligned_weights(weights, ranking.size)
        induced = a[rows].T @ (ranking.values @ w)
    elif isinstance(ranking, PartialStochasticMatrix):
        rows = np.asarray(ranking.row_items)
        _check_ids(rows, a.shape[0])
        w = _aligned_weights(weights, ranking.num_slots)
        induced = a[rows].T @ (ranking.values @ w)
    elif isinstance(ranking, PermutationRanking):
        rows = ranking.assignment
        _check_ids(rows, a.shape[0])
        w = _aligned_weights(weights, rows.size)
        induced = a[rows].T @ w
    else:
        raise TypeError(f"unsupported ranking type {type(ranking).__name__}")
    return CategoryDistribution(induced)


def _check_ids(ids: np.ndarray, n_rows: int) -> None:
    if ids.size and (int(ids.min()) < 0 or int(ids.max()) >= n_rows):
        raise ValueError(f"item identifier {int(ids.max())} outside the {n_rows}-row category matrix")


def expected_relevance(scores: np.ndarray, ranking, weights) -> float:
    """Expected score mass s' P e delivered by a ranking."""
    s = np.asarray(scores, dtype=np.float64)
    if isinstance(ranking, DoublyStochasticMatrix):
        rows = np.asarray(ranking.item_map)
        _check_ids(rows, s.size)
        w = _aligned_weights(weights, ranking.size)
        return float(s[rows] @ ranking.values @ w)
    if isinstance(ranking, PartialStochasticMatrix):
        rows = np.asarray(ranking.row_items)
        _check_ids(rows, s.size)
        w = _aligned_weights(weights, ranking.num_slots)
        return float(s[rows] @ ranking.values @ w)
    if isinstance(ranking, PermutationRanking):
        rows = ranking.assignment
        _check_ids(rows, s.size)
        w = _aligned_weights(weights, rows.size)
        return float(s[rows] @ w)
    raise TypeError(f"unsupported ranking type {type(ranking).__name__}")


def ndcg_at_k(ranking: PermutationRanking, relevant, k: int) -> float:
    """Binary-gain NDCG with log2 discounts over the top ``k`` slots.

    The ideal DCG places min(k, |relevant|) relevant items at the top; the
    result is 0 when no relevant item appears in the prefix.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    relevant = set(int(i) for i in relevant)
    if not relevant:
        return 0.0
    top = ranking.assignment[: min(k, len(ranking))]
    discounts = 1.0 / np.log2(np.arange(2, top.size + 2))
    gains = np.fromiter((1.0 if int(item) in relevant else 0.0 for item in top), np.float64, top.size)
    dcg = float(gains @ discounts)
    ideal = float(discounts[: min(k, len(relevant))].sum())
    return dcg / ideal if ideal > 0.0 else 0.0


def mrr(ranking: PermutationRanking, relevant, k: int) -> float:
    """Reciprocal rank of the first relevant item within the top ``k``, else 0."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    relevant = set(int(i) for i in relevant)
    for position, item in enumerate(ranking.assignment[: min(k, len(ranking))], start=1):
        if int(item) in relevant:
            return 1.0 / position
    return 0.0


def expected_kl_of_policy(policy: RankingPolicy, categories, weights, target, alpha: float) -> float:
    """Weighted mean divergence over a policy's permutation components.

    By concavity of the logarithm this is an upper bound on the divergence of
    the policy's expected induced distribution, which is why the optimizer
    penalizes linear deviation instead.
    """
    total = 0.0
    for theta, perm in policy.components:
        p = induced_distribution(categories, perm, weights)
        total += theta * kl_divergence(target, p, alpha)
    return total
