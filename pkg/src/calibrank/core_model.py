"""Core domain types for calibrated re-ranking.

A ranking instance couples per-item relevance scores with a category
membership matrix, a target category distribution, and normalized position
weights. Stochastic rankings are represented at three levels: a
column-stochastic item/slot matrix over the top-k slots, a doubly stochastic
matrix over retained items, and a convex combination of permutations that can
actually be sampled.

All types are immutable after construction (arrays are marked read-only) and
safe to share across threads.
"""

from __future__ import annotations

import dataclasses

import numpy as np

# Constructors reject invariant violations beyond this tolerance.
HARD_TOLERANCE = 1e-6
# Internal arithmetic (sanitizers, generators, validators) targets this.
TARGET_TOLERANCE = 1e-9

POSITION_WEIGHT_KINDS = ("log", "sqrt", "reciprocal")


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def make_position_weights(kind: str, k: int) -> np.ndarray:
    """Normalized, strictly decreasing exposure weights for ``k`` ranking slots.

    ``kind`` selects the decay profile for slot j (1-based): ``"log"`` gives
    1/log(j+1), ``"sqrt"`` gives 1/sqrt(j) and ``"reciprocal"`` gives 1/j.
    Weights are normalized to sum to one, which also makes the logarithm base
    irrelevant for the ``"log"`` profile (any base rescales all weights by the
    same constant). Natural log is used internally.
    """
    if k < 1:
        raise ValueError(f"slot count must be at least 1, got {k}")
    slots = np.arange(1, k + 1, dtype=np.float64)
    if kind == "log":
        weights = 1.0 / np.log(slots + 1.0)
    elif kind == "sqrt":
        weights = 1.0 / np.sqrt(slots)
    elif kind == "reciprocal":
        weights = 1.0 / slots
    else:
        raise ValueError(f"unknown position weight kind {kind!r}; expected one of {POSITION_WEIGHT_KINDS}")
    return weights / weights.sum()


@dataclasses.dataclass(frozen=True)
class CategoryDistribution:
    """Probability vector over calibration categories."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        low = float(probs.min())
        if low < -HARD_TOLERANCE:
            raise ValueError(f"category {int(probs.argmin())} has negative probability {low}")
        total = float(probs.sum())
        if abs(total - 1.0) > HARD_TOLERANCE:
            raise ValueError(f"category probabilities sum to {total}, expected 1")
        object.__setattr__(self, "probs", _frozen_array(probs))

    def __len__(self) -> int:
        return self.probs.size


@dataclasses.dataclass(frozen=True)
class RankingProblem:
    """One user's calibration instance.

    scores: relevance score per candidate item, length n.
    position_weights: strictly positive, strictly decreasing slot weights
        summing to one, length k with k <= n.
    categories: per-item category memberships, shape (n, r), rows sum to one.
    target: desired category distribution, length r.
    lam: trade-off weight in [0, 1]; 0 is pure relevance, 1 pure calibration.

    The constructor only enforces structural consistency (shapes and k <= n);
    numeric invariants are reported by :func:`validate_problem` so that
    malformed instances can be inspected rather than rejected outright.
    """

    scores: np.ndarray
    position_weights: np.ndarray
    categories: np.ndarray
    target: CategoryDistribution
    lam: float

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        weights = np.asarray(self.position_weights, dtype=np.float64)
        categories = np.asarray(self.categories, dtype=np.float64)
        if scores.ndim != 1 or scores.size == 0:
            raise ValueError("scores must be a non-empty 1-D vector")
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("position_weights must be a non-empty 1-D vector")
        if categories.ndim != 2:
            raise ValueError("categories must be a 2-D matrix")
        if categories.shape[0] != scores.size:
            raise ValueError(
                f"categories has {categories.shape[0]} rows but there are {scores.size} scores"
            )
        if weights.size > scores.size:
            raise ValueError(f"slot count {weights.size} exceeds item count {scores.size}")
        if len(self.target) != categories.shape[1]:
            raise ValueError(
                f"target has {len(self.target)} categories but the matrix has {categories.shape[1]}"
            )
        object.__setattr__(self, "scores", _frozen_array(scores))
        object.__setattr__(self, "position_weights", _frozen_array(weights))
        object.__setattr__(self, "categories", _frozen_array(categories))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n(self) -> int:
        return self.scores.size

    @property
    def k(self) -> int:
        return self.position_weights.size

    @property
    def r(self) -> int:
        return self.categories.shape[1]

    def with_lambda(self, lam: float) -> "RankingProblem":
        return dataclasses.replace(self, lam=lam)


def validate_problem(problem: RankingProblem) -> list[str]:
    """Check every numeric invariant of a problem, one message per violation.

    Returns an empty list when the problem is well formed; never raises.
    Each message names the violated constraint and the offending index.
    """
    issues: list[str] = []
    w = problem.position_weights
    if not np.all(np.isfinite(w)):
        issues.append(f"position weight {int(np.flatnonzero(~np.isfinite(w))[0])} is not finite")
    else:
        if float(w.min()) <= 0.0:
            issues.append(f"position weight {int(w.argmin())} is not strictly positive")
        steps = np.diff(w)
        if steps.size and float(steps.max()) >= 0.0:
            issues.append(f"position weights not strictly decreasing at slot {int(steps.argmax()) + 2}")
        total = float(w.sum())
        if abs(total - 1.0) > TARGET_TOLERANCE:
            issues.append(f"position weights sum to {total}, expected 1")

    s = problem.scores
    if not np.all(np.isfinite(s)):
        issues.append(f"score {int(np.flatnonzero(~np.isfinite(s))[0])} is not finite")

    a = problem.categories
    for i in np.flatnonzero(a.min(axis=1) < -TARGET_TOLERANCE):
        j = int(a[i].argmin())
        issues.append(f"categories entry ({int(i)}, {j}) is negative: {a[i, j]}")
    row_sums = a.sum(axis=1)
    for i in np.flatnonzero(np.abs(row_sums - 1.0) > TARGET_TOLERANCE):
        issues.append(f"categories row {int(i)} sums to {row_sums[i]}")

    t = problem.target.probs
    for i in np.flatnonzero(t < -TARGET_TOLERANCE):
        issues.append(f"target entry {int(i)} is negative: {t[i]}")
    t_total = float(t.sum())
    if abs(t_total - 1.0) > TARGET_TOLERANCE:
        issues.append(f"target sums to {t_total}, expected 1")

    if not 0.0 <= problem.lam <= 1.0:
        issues.append("lambda outside [0,1]")
    return issues


@dataclasses.dataclass(frozen=True)
class PartialStochasticMatrix:
    """Column-stochastic item-to-slot probabilities over the top-k slots.

    ``values[i, j]`` is the probability that item ``row_items[i]`` occupies
    slot j. Every column sums to one; row sums may be at most one because an
    item can also land outside the shown slots.
    """

    values: np.ndarray
    row_items: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("values must be a non-empty 2-D matrix")
        n, k = values.shape
        if k > n:
            raise ValueError(f"more slots ({k}) than items ({n})")
        items = tuple(int(i) for i in self.row_items)
        if len(items) != n:
            raise ValueError(f"{len(items)} row items for {n} rows")
        if len(set(items)) != n:
            raise ValueError("duplicate item identifiers in row_items")
        low = float(values.min())
        if low < -HARD_TOLERANCE:
            i, j = np.unravel_index(int(values.argmin()), values.shape)
            raise ValueError(f"entry ({i}, {j}) is negative: {low}")
        col_sums = values.sum(axis=0)
        worst = int(np.abs(col_sums - 1.0).argmax())
        if abs(col_sums[worst] - 1.0) > HARD_TOLERANCE:
            raise ValueError(f"column {worst} sums to {col_sums[worst]}, expected 1")
        row_sums = values.sum(axis=1)
        if float(row_sums.max()) > 1.0 + HARD_TOLERANCE:
            raise ValueError(f"row {int(row_sums.argmax())} sums to {row_sums.max()} > 1")
        object.__setattr__(self, "values", _frozen_array(values))
        object.__setattr__(self, "row_items", items)

    @property
    def num_items(self) -> int:
        return self.values.shape[0]

    @property
    def num_slots(self) -> int:
        return self.values.shape[1]


@dataclasses.dataclass(frozen=True)
class DoublyStochasticMatrix:
    """Square non-negative matrix with unit row and column sums.

    Rows are items (identified through ``item_map``), columns are slots.
    """

    values: np.ndarray
    item_map: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.size == 0:
            raise ValueError("values must be a non-empty square matrix")
        m = values.shape[0]
        items = tuple(int(i) for i in self.item_map)
        if len(items) != m or len(set(items)) != m:
            raise ValueError(f"item_map must hold {m} distinct identifiers")
        low = float(values.min())
        if low < -HARD_TOLERANCE:
            i, j = np.unravel_index(int(values.argmin()), values.shape)
            raise ValueError(f"entry ({i}, {j}) is negative: {low}")
        row_sums = values.sum(axis=1)
        worst_row = int(np.abs(row_sums - 1.0).argmax())
        if abs(row_sums[worst_row] - 1.0) > HARD_TOLERANCE:
            raise ValueError(f"row {worst_row} sums to {row_sums[worst_row]}, expected 1")
        col_sums = values.sum(axis=0)
        worst_col = int(np.abs(col_sums - 1.0).argmax())
        if abs(col_sums[worst_col] - 1.0) > HARD_TOLERANCE:
            raise ValueError(f"column {worst_col} sums to {col_sums[worst_col]}, expected 1")
        object.__setattr__(self, "values", _frozen_array(values))
        object.__setattr__(self, "item_map", items)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclasses.dataclass(frozen=True)
class PermutationRanking:
    """Deterministic ranking: ``assignment[j]`` is the item shown at slot j."""

    assignment: np.ndarray

    def __post_init__(self):
        assignment = np.asarray(self.assignment)
        if assignment.ndim != 1 or assignment.size == 0:
            raise ValueError("assignment must be a non-empty 1-D sequence")
        if not np.issubdtype(assignment.dtype, np.integer):
            raise ValueError("item identifiers must be integers")
        assignment = assignment.astype(np.int64)
        if np.unique(assignment).size != assignment.size:
            raise ValueError("assignment repeats an item")
        object.__setattr__(self, "assignment", _frozen_array(assignment, dtype=np.int64))

    def __len__(self) -> int:
        return self.assignment.size

    def top(self, count: int) -> np.ndarray:
        return self.assignment[:count]

    def to_matrix(self, item_order=None) -> np.ndarray:
        """0/1 slot-assignment matrix, rows ordered by ``item_order``.

        Defaults to ascending item identifier, matching the row layout used
        when a policy is folded back into a doubly stochastic matrix.
        """
        if item_order is None:
            item_order = np.sort(self.assignment)
        order = np.asarray(item_order, dtype=np.int64)
        if order.size != self.assignment.size:
            raise ValueError("item_order must enumerate exactly the ranked items")
        rows = np.searchsorted(order, self.assignment)
        if np.any(order[rows] != self.assignment):
            raise ValueError("item_order does not cover all ranked items")
        matrix = np.zeros((order.size, order.size))
        matrix[rows, np.arange(order.size)] = 1.0
        return matrix


@dataclasses.dataclass(frozen=True)
class RankingPolicy:
    """Convex combination of permutations, sampled as a stochastic ranking."""

    components: tuple[tuple[float, PermutationRanking], ...]

    def __post_init__(self):
        components = tuple((float(t), perm) for t, perm in self.components)
        if not components:
            raise ValueError("policy needs at least one component")
        thetas = np.array([t for t, _ in components])
        if float(thetas.min()) <= 0.0:
            raise ValueError(f"component {int(thetas.argmin())} has non-positive weight {thetas.min()}")
        total = float(thetas.sum())
        if abs(total - 1.0) > HARD_TOLERANCE:
            raise ValueError(f"component weights sum to {total}, expected 1")
        universe = np.sort(components[0][1].assignment)
        for _, perm in components[1:]:
            if not np.array_equal(np.sort(perm.assignment), universe):
                raise ValueError("components rank different item sets")
        m = universe.size
        bound = (m - 1) ** 2 + 1
        if len(components) > bound:
            raise ValueError(f"{len(components)} components exceeds the bound {bound} for size {m}")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "_thetas", _frozen_array(thetas))
        object.__setattr__(self, "_universe", _frozen_array(universe, dtype=np.int64))

    @property
    def thetas(self) -> np.ndarray:
        return self._thetas

    @property
    def permutations(self) -> tuple[PermutationRanking, ...]:
        return tuple(perm for _, perm in self.components)

    @property
    def item_universe(self) -> np.ndarray:
        """Ranked item identifiers in ascending order."""
        return self._universe

    def __len__(self) -> int:
        return len(self.components)
