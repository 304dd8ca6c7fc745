"""Dataset ingestion and experiment preparation.

File formats (all delimiter-separated text with a header row, comma by
default):

* interactions: ``user,item,rating`` with an optional ``timestamp`` column;
  user and item are integers, rating is a float.
* item catalog: ``item,genres,year``; genres are pipe-separated names and may
  be empty, year may be empty.
* model scores: ``user,item,score``.
* category memberships: ``item,category`` with an optional ``weight`` column
  (default 1); weights are normalized per item.

Ratings strictly above the positive threshold are positive. Users with fewer
interactions than the minimum are dropped at load time. All splits and
generators take explicit seeds and are reproducible across runs and
platforms (numpy PCG64).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging

import numpy as np

from .core_model import (
    CategoryDistribution,
    RankingProblem,
    make_position_weights,
)

logger = logging.getLogger(__name__)

UNKNOWN_CATEGORY = "unknown"
DECADE_LABELS = tuple(f"{year}s" for year in range(1920, 2020, 10))
POPULARITY_LABELS = ("popular", "less-popular")
SCORE_DISTRIBUTIONS = ("normal", "uniform", "exponential")


class ParseError(ValueError):
    """A data file row could not be interpreted."""


class EmptyDatasetError(ValueError):
    """Loading and filtering left no usable records."""


@dataclasses.dataclass(frozen=True)
class ItemMeta:
    genres: tuple[str, ...] = ()
    year: int | None = None
    positive_count: int = 0


@dataclasses.dataclass(frozen=True)
class InteractionDataset:
    """Per-user (item, rating) records plus the item catalog.

    ``users`` maps user id to its interaction tuple; ``items`` maps item id
    to catalog metadata including the dataset-wide positive count. Treat both
    as immutable.
    """

    users: dict[int, tuple[tuple[int, float], ...]]
    items: dict[int, ItemMeta]
    positive_threshold: float

    def positives(self, user: int) -> tuple[int, ...]:
        """Item ids the user rated strictly above the positive threshold."""
        return tuple(item for item, rating in self.users[user] if rating > self.positive_threshold)


@dataclasses.dataclass(frozen=True)
class UserEvalInstance:
    """One evaluation user: history builds the target, holdout is scored."""

    user: int
    history: frozenset[int]
    holdout: frozenset[int]
    candidate_items: tuple[int, ...]
    candidate_scores: np.ndarray

    def __post_init__(self):
        if self.history & self.holdout:
            raise ValueError("history and holdout overlap")
        if self.history & set(self.candidate_items):
            raise ValueError("candidates include history items")
        scores = np.asarray(self.candidate_scores, dtype=np.float64)
        scores.flags.writeable = False
        object.__setattr__(self, "candidate_scores", scores)


@dataclasses.dataclass(frozen=True)
class CategoryMatrix:
    """Catalog-wide category rows: one row per item, rows sum to one."""

    values: np.ndarray
    labels: tuple[str, ...]
    item_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row_of", {item: i for i, item in enumerate(self.item_ids)})

    @property
    def num_categories(self) -> int:
        return self.values.shape[1]

    def rows_for(self, items) -> np.ndarray:
        """Category rows for the given item ids, in the given order."""
        return self.values[[self._row_of[int(i)] for i in items]]


def _read_rows(path, required: tuple[str, ...], optional: tuple[str, ...] = ()):
    """Yield (line_number, row_dict) from a delimited file with a header."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        missing = [col for col in required if col not in header]
        if missing:
            raise ParseError(f"{path}: header misses required columns {missing}; found {header}")
        allowed = set(required) | set(optional)
        extra = [col for col in header if col not in allowed]
        if extra:
            raise ParseError(f"{path}: unexpected columns {extra}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            yield line_no, dict(zip(header, (field.strip() for field in row)))


def _parse_int(value: str, path, line_no: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: column {column!r} is not an integer: {value!r}") from None


def _parse_float(value: str, path, line_no: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: column {column!r} is not a number: {value!r}") from None


def load_catalog(path) -> dict[int, ItemMeta]:
    """Item metadata file: ``item,genres,year`` with pipe-separated genres."""
    catalog: dict[int, ItemMeta] = {}
    for line_no, row in _read_rows(path, required=("item",), optional=("genres", "year", "title")):
        item = _parse_int(row["item"], path, line_no, "item")
        if item in catalog:
            raise ParseError(f"{path}:{line_no}: duplicate item {item}")
        genres = tuple(g.strip() for g in row.get("genres", "").split("|") if g.strip())
        year_field = row.get("year", "")
        year = _parse_int(year_field, path, line_no, "year") if year_field else None
        catalog[item] = ItemMeta(genres=genres, year=year)
    if not catalog:
        raise EmptyDatasetError(f"{path}: no items")
    return catalog


def load_interactions(
    path,
    positive_threshold: float = 3.5,
    min_interactions: int = 5,
    items_path=None,
) -> InteractionDataset:
    """Load rating interactions, label positives, and drop sparse users.

    A rating is positive only when strictly above ``positive_threshold``.
    Users with fewer than ``min_interactions`` total interactions are removed.
    When ``items_path`` is given, every interaction must reference a cataloged
    item; otherwise the catalog is derived from the interactions themselves.
    """
    catalog = load_catalog(items_path) if items_path is not None else None
    per_user: dict[int, list[tuple[int, float]]] = {}
    seen: set[tuple[int, int]] = set()
    for line_no, row in _read_rows(path, required=("user", "item", "rating"), optional=("timestamp",)):
        user = _parse_int(row["user"], path, line_no, "user")
        item = _parse_int(row["item"], path, line_no, "item")
        rating = _parse_float(row["rating"], path, line_no, "rating")
        if (user, item) in seen:
            raise ParseError(f"{path}:{line_no}: duplicate interaction for user {user}, item {item}")
        seen.add((user, item))
        if catalog is not None and item not in catalog:
            raise ParseError(f"{path}:{line_no}: item {item} is not in the catalog")
        per_user.setdefault(user, []).append((item, rating))

    users = {
        user: tuple(records)
        for user, records in sorted(per_user.items())
        if len(records) >= min_interactions
    }
    if not users:
        raise EmptyDatasetError(f"{path}: no users with at least {min_interactions} interactions")

    positive_counts: dict[int, int] = {}
    referenced: set[int] = set()
    for records in users.values():
        for item, rating in records:
            referenced.add(item)
            if rating > positive_threshold:
                positive_counts[item] = positive_counts.get(item, 0) + 1

    if catalog is None:
        catalog = {item: ItemMeta() for item in referenced}
    items = {
        item: dataclasses.replace(meta, positive_count=positive_counts.get(item, 0))
        for item, meta in sorted(catalog.items())
    }
    return InteractionDataset(users=users, items=items, positive_threshold=positive_threshold)


def split_users(
    dataset: InteractionDataset,
    train_frac: float | None,
    val_count: int,
    test_count: int,
    seed,
) -> tuple[frozenset[int], frozenset[int], frozenset[int]]:
    """Partition users into train/validation/test sets, covering everyone.

    Validation and test take the requested counts from a seeded shuffle and
    training takes the remainder, so the three sets are disjoint and
    exhaustive. ``train_frac``, when given, must be consistent with the
    implied remainder (within one user).
    """
    eligible = sorted(dataset.users)
    total = len(eligible)
    if val_count < 0 or test_count < 0 or val_count + test_count >= total:
        raise ValueError(f"cannot draw {val_count} validation and {test_count} test users from {total}")
    implied_train = total - val_count - test_count
    if train_frac is not None and abs(train_frac * total - implied_train) > 1.0:
        raise ValueError(
            f"train_frac {train_frac} is inconsistent with {implied_train} remaining of {total} users"
        )
    order = np.random.default_rng(seed).permutation(total)
    shuffled = [eligible[i] for i in order]
    val = frozenset(shuffled[:val_count])
    test = frozenset(shuffled[val_count : val_count + test_count])
    train = frozenset(shuffled[val_count + test_count :])
    return train, val, test


def split_history_holdout(positives, history_frac: float, seed) -> tuple[frozenset[int], frozenset[int]]:
    """Seeded random split of positive items into history and holdout.

    History receives round(history_frac * count) items, with at least one
    item on each side.
    """
    items = sorted(int(i) for i in positives)
    if len(items) < 2:
        raise ValueError(f"need at least 2 positive items to split, got {len(items)}")
    history_size = int(round(history_frac * len(items)))
    history_size = min(max(history_size, 1), len(items) - 1)
    order = np.random.default_rng(seed).permutation(len(items))
    shuffled = [items[i] for i in order]
    return frozenset(shuffled[:history_size]), frozenset(shuffled[history_size:])


def build_genre_matrix(catalog: dict[int, ItemMeta]) -> CategoryMatrix:
    """Equal-weight genre memberships: 1/g in each of an item's g genre columns.

    Items with no listed genre fall into a dedicated "unknown" column, which
    is appended only when needed.
    """
    labels = sorted({genre for meta in catalog.values() for genre in meta.genres})
    needs_unknown = any(not meta.genres for meta in catalog.values())
    if needs_unknown:
        labels = labels + [UNKNOWN_CATEGORY]
    column = {label: j for j, label in enumerate(labels)}
    item_ids = tuple(sorted(catalog))
    values = np.zeros((len(item_ids), len(labels)))
    for i, item in enumerate(item_ids):
        genres = catalog[item].genres
        if not genres:
            values[i, column[UNKNOWN_CATEGORY]] = 1.0
            continue
        weight = 1.0 / len(genres)
        for genre in genres:
            values[i, column[genre]] = weight
    return CategoryMatrix(values, tuple(labels), item_ids)


def build_year_matrix(catalog: dict[int, ItemMeta]) -> CategoryMatrix:
    """One-hot decade buckets from the 1920s through the 2010s.

    Years outside the range clamp into the nearest end bucket; items without
    a year fall into an appended "unknown" bucket.
    """
    labels = list(DECADE_LABELS)
    needs_unknown = any(meta.year is None for meta in catalog.values())
    if needs_unknown:
        labels.append(UNKNOWN_CATEGORY)
    item_ids = tuple(sorted(catalog))
    values = np.zeros((len(item_ids), len(labels)))
    for i, item in enumerate(item_ids):
        year = catalog[item].year
        if year is None:
            values[i, len(DECADE_LABELS)] = 1.0
            continue
        bucket = min(max((year - 1920) // 10, 0), len(DECADE_LABELS) - 1)
        values[i, bucket] = 1.0
    return CategoryMatrix(values, tuple(labels), item_ids)


def build_popularity_matrix(
    dataset: InteractionDataset,
    top_frac: float = 0.05,
    train_users=None,
) -> CategoryMatrix:
    """One-hot popular / less-popular split by positive-interaction counts.

    The popular tier holds the ceil(top_frac * catalog) items with the most
    positives, ties at the boundary broken by lower item id. Pass
    ``train_users`` to count positives over training users only and keep
    evaluation data out of the tiering.
    """
    if not 0.0 < top_frac <= 1.0:
        raise ValueError(f"top_frac must lie in (0, 1], got {top_frac}")
    counts = {item: 0 for item in dataset.items}
    users = dataset.users if train_users is None else {u: dataset.users[u] for u in train_users}
    for records in users.values():
        for item, rating in records:
            if rating > dataset.positive_threshold:
                counts[item] += 1
    item_ids = tuple(sorted(dataset.items))
    popular_size = int(np.ceil(top_frac * len(item_ids)))
    ranked = sorted(item_ids, key=lambda item: (-counts[item], item))
    popular = set(ranked[:popular_size])
    values = np.zeros((len(item_ids), 2))
    for i, item in enumerate(item_ids):
        values[i, 0 if item in popular else 1] = 1.0
    return CategoryMatrix(values, POPULARITY_LABELS, item_ids)


def load_category_file(path) -> CategoryMatrix:
    """Explicit per-item category memberships, normalized per item."""
    memberships: dict[int, dict[str, float]] = {}
    for line_no, row in _read_rows(path, required=("item", "category"), optional=("weight",)):
        item = _parse_int(row["item"], path, line_no, "item")
        weight = _parse_float(row["weight"], path, line_no, "weight") if row.get("weight") else 1.0
        if weight <= 0:
            raise ParseError(f"{path}:{line_no}: weight must be positive")
        slot = memberships.setdefault(item, {})
        slot[row["category"]] = slot.get(row["category"], 0.0) + weight
    if not memberships:
        raise EmptyDatasetError(f"{path}: no memberships")
    labels = sorted({label for slots in memberships.values() for label in slots})
    column = {label: j for j, label in enumerate(labels)}
    item_ids = tuple(sorted(memberships))
    values = np.zeros((len(item_ids), len(labels)))
    for i, item in enumerate(item_ids):
        total = sum(memberships[item].values())
        for label, weight in memberships[item].items():
            values[i, column[label]] = weight / total
    return CategoryMatrix(values, tuple(labels), item_ids)


def build_target_distribution(history, matrix: CategoryMatrix, weights=None) -> CategoryDistribution:
    """Mean category row over the user's history items.

    An empty history yields the uniform distribution. ``weights`` optionally
    reweights history items (for example by recency); they are normalized.
    """
    items = sorted(int(i) for i in history)
    r = matrix.num_categories
    if not items:
        return CategoryDistribution(np.full(r, 1.0 / r))
    rows = matrix.rows_for(items)
    if weights is None:
        target = rows.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(items),) or float(w.min()) < 0 or float(w.sum()) <= 0:
            raise ValueError("weights must be non-negative, one per history item")
        target = (w / w.sum()) @ rows
    return CategoryDistribution(target)


def load_scores(path, catalog: dict[int, ItemMeta] | None = None) -> dict[int, tuple[tuple[int, float], ...]]:
    """Per-user model scores, sorted by descending score (ties by item id).

    When a catalog is given, unknown item ids raise with the offenders listed.
    """
    per_user: dict[int, list[tuple[int, float]]] = {}
    unknown: list[tuple[int, int]] = []
    for line_no, row in _read_rows(path, required=("user", "item", "score")):
        user = _parse_int(row["user"], path, line_no, "user")
        item = _parse_int(row["item"], path, line_no, "item")
        score = _parse_float(row["score"], path, line_no, "score")
        if catalog is not None and item not in catalog:
            unknown.append((line_no, item))
            continue
        per_user.setdefault(user, []).append((item, score))
    if unknown:
        listing = ", ".join(f"line {line}: item {item}" for line, item in unknown[:10])
        raise ParseError(f"{path}: {len(unknown)} scores reference unknown items ({listing})")
    if not per_user:
        raise EmptyDatasetError(f"{path}: no scores")
    return {
        user: tuple(sorted(records, key=lambda pair: (-pair[1], pair[0])))
        for user, records in sorted(per_user.items())
    }


def build_candidates(user_scores, history, n: int) -> tuple[tuple[int, ...], np.ndarray]:
    """Top-n scored items excluding the user's history.

    Returns the candidate ids and their scores; logs a warning and truncates
    when fewer than n scored items remain.
    """
    history = set(int(i) for i in history)
    picked = [(item, score) for item, score in user_scores if item not in history][:n]
    if len(picked) < n:
        logger.warning("only %d of %d requested candidates available; truncating", len(picked), n)
    items = tuple(item for item, _ in picked)
    scores = np.array([score for _, score in picked], dtype=np.float64)
    return items, scores


def synthetic_instance(
    seed,
    n: int,
    k: int,
    r: int,
    score_distribution: str = "normal",
    category_sparsity: float = 0.25,
    weight_kind: str = "log",
    lam: float = 0.5,
) -> RankingProblem:
    """Seeded random calibration instance with valid invariants.

    Category rows spread equal weight over 1 + Binomial(r-1, sparsity)
    categories; the target is a Dirichlet-weighted mixture of item rows, so
    it is approximately achievable by some ranking.
    """
    if n < 1 or r < 1 or not 1 <= k <= n:
        raise ValueError(f"need n >= 1, r >= 1 and 1 <= k <= n; got n={n}, k={k}, r={r}")
    if not 0.0 <= category_sparsity <= 1.0:
        raise ValueError(f"category_sparsity must lie in [0, 1], got {category_sparsity}")
    rng = np.random.default_rng(seed)
    if score_distribution == "normal":
        scores = rng.normal(0.0, 1.0, size=n)
    elif score_distribution == "uniform":
        scores = rng.uniform(0.0, 1.0, size=n)
    elif score_distribution == "exponential":
        scores = rng.exponential(1.0, size=n)
    else:
        raise ValueError(f"unknown score distribution {score_distribution!r}; expected one of {SCORE_DISTRIBUTIONS}")
    categories = np.zeros((n, r))
    for i in range(n):
        memberships = 1 + rng.binomial(r - 1, category_sparsity)
        columns = rng.choice(r, size=memberships, replace=False)
        categories[i, columns] = 1.0 / memberships
    target = rng.dirichlet(np.ones(n)) @ categories
    weights = make_position_weights(weight_kind, k)
    return RankingProblem(scores, weights, categories, CategoryDistribution(target), lam)


def load_problem(path) -> RankingProblem:
    """Single-instance problem file (JSON).

    Keys: ``scores`` (list), ``categories`` (list of rows), ``target``
    (list), ``lambda`` (float), and either ``position_weights`` (list) or
    ``position_weight_kind`` plus ``k``.
    """
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    for key in ("scores", "categories", "target", "lambda"):
        if key not in payload:
            raise ParseError(f"{path}: missing key {key!r}")
    if "position_weights" in payload:
        weights = np.asarray(payload["position_weights"], dtype=np.float64)
    else:
        kind = payload.get("position_weight_kind", "log")
        if "k" not in payload:
            raise ParseError(f"{path}: provide position_weights, or k with position_weight_kind")
        weights = make_position_weights(kind, int(payload["k"]))
    return RankingProblem(
        scores=np.asarray(payload["scores"], dtype=np.float64),
        position_weights=weights,
        categories=np.asarray(payload["categories"], dtype=np.float64),
        target=CategoryDistribution(np.asarray(payload["target"], dtype=np.float64)),
        lam=float(payload["lambda"]),
    )
