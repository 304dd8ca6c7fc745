"""From an optimized stochastic matrix to an executable ranking policy.

Pipeline: drop items the optimizer never places in a shown slot, complete the
remaining rectangular matrix to a doubly stochastic one by greedily packing
row deficits into appended columns, decompose it into a convex combination of
permutations, and sample one permutation per request. The appended columns
carry zero position weight, so augmentation never changes any expected
quantity of the original solution.
"""

from __future__ import annotations

import io

import numpy as np

from . import kernels
from .calibration_lp import sanitize
from .core_model import (
    DoublyStochasticMatrix,
    PartialStochasticMatrix,
    PermutationRanking,
    RankingPolicy,
)

DROP_THRESHOLD = 1e-9
RESIDUAL_TOLERANCE = 1e-9


class DecompositionError(RuntimeError):
    """Decomposition could not complete; indicates broken double stochasticity."""


def drop_zero_rows(matrix: PartialStochasticMatrix, threshold: float = DROP_THRESHOLD) -> PartialStochasticMatrix:
    """Remove items with total placement probability below ``threshold``.

    The removed mass (strictly less than n * threshold) is redistributed by
    renormalizing each column; the retained-item map shrinks accordingly.
    """
    sums = matrix.values.sum(axis=1)
    keep = sums >= threshold
    if bool(keep.all()):
        return matrix
    values = matrix.values[keep]
    values = values / values.sum(axis=0)
    items = tuple(item for item, kept in zip(matrix.row_items, keep) if kept)
    # Renormalization can push a row a hair above one when the dropped rows
    # carried real (sub-threshold) mass; sanitize shifts that excess away so
    # augmentation gets exact inputs.
    return sanitize(values, threshold * matrix.num_items + 1e-9, row_items=items)


def augment_and_get_ds(matrix: PartialStochasticMatrix) -> DoublyStochasticMatrix:
    """Complete an m x k column-stochastic matrix to an m x m doubly stochastic one.

    The first k columns are copied bit-for-bit. Each appended column is filled
    greedily: repeatedly take the largest remaining row deficit (lowest row
    index on ties) and pack it in until the column sums to one.
    """
    values = matrix.values
    m, k = values.shape
    deficits = np.clip(1.0 - values.sum(axis=1), 0.0, None)
    expected = float(m - k)
    if abs(float(deficits.sum()) - expected) > 1e-9:
        raise ValueError(
            f"row deficits sum to {deficits.sum()}, expected {expected}; input is not column-stochastic"
        )
    out = np.zeros((m, m))
    out[:, :k] = values
    for j in range(k, m):
        capacity = 1.0
        while capacity > 0.0:
            i = int(deficits.argmax())
            take = deficits[i] if deficits[i] < capacity else capacity
            if take <= 0.0:
                break
            out[i, j] += take
            deficits[i] -= take
            capacity -= take
    return DoublyStochasticMatrix(out, matrix.row_items)


def bvn_decompose(matrix: DoublyStochasticMatrix, residual_tolerance: float = RESIDUAL_TOLERANCE) -> RankingPolicy:
    """Decompose a doubly stochastic matrix into a sampling policy.

    Extracts perfect matchings from the positive residual support, each
    weighted by its minimum matched entry, until the residual mass falls
    below ``residual_tolerance``; weights are then renormalized to absorb
    the accumulated float error. The reconstruction is verified to 1e-6 in
    max-norm before returning.
    """
    try:
        thetas, perms = kernels.bvn_extract(matrix.values, residual_tolerance)
    except ArithmeticError as exc:
        raise DecompositionError(str(exc)) from exc
    if thetas.size == 0:
        raise DecompositionError("no components extracted; residual tolerance exceeds matrix mass")
    thetas = thetas / thetas.sum()

    m = matrix.size
    reconstruction = np.zeros((m, m))
    columns = np.arange(m)
    for theta, rows_for_cols in zip(thetas, perms):
        reconstruction[rows_for_cols, columns] += theta
    gap = float(np.abs(reconstruction - matrix.values).max())
    if gap > 1e-6:
        raise DecompositionError(f"reconstruction error {gap} exceeds 1e-6")

    item_map = np.asarray(matrix.item_map, dtype=np.int64)
    components = tuple(
        (float(theta), PermutationRanking(item_map[rows_for_cols])) for theta, rows_for_cols in zip(thetas, perms)
    )
    return RankingPolicy(components)


def sample(policy: RankingPolicy, rng_seed: int) -> PermutationRanking:
    """Draw one permutation, component i with probability theta_i.

    Uses numpy's seeded PCG64 generator, so identical seeds give identical
    permutations on every platform.
    """
    rng = np.random.default_rng(rng_seed)
    draw = rng.random()
    cumulative = np.cumsum(policy.thetas)
    index = min(int(np.searchsorted(cumulative, draw, side="right")), len(policy) - 1)
    return policy.components[index][1]


def expected_matrix(policy: RankingPolicy) -> DoublyStochasticMatrix:
    """Fold a policy back into its expectation, rows ordered by ascending item id."""
    universe = policy.item_universe
    m = universe.size
    values = np.zeros((m, m))
    columns = np.arange(m)
    for theta, perm in policy.components:
        rows = np.searchsorted(universe, perm.assignment)
        values[rows, columns] += theta
    return DoublyStochasticMatrix(values, tuple(int(i) for i in universe))


def write_policy(policy: RankingPolicy, path) -> None:
    """Serialize a policy as text: one component per line, weight then items.

    Line format: ``theta item_at_slot_1 item_at_slot_2 ...`` with full float
    precision; lines starting with ``#`` are comments.
    """
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(policy_to_text(policy))


def policy_to_text(policy: RankingPolicy) -> str:
    out = io.StringIO()
    out.write("# calibrank policy: theta followed by the item at each slot\n")
    for theta, perm in policy.components:
        items = " ".join(str(int(i)) for i in perm.assignment)
        out.write(f"{theta!r} {items}\n")
    return out.getvalue()


def read_policy(path) -> RankingPolicy:
    """Parse the text format written by :func:`write_policy`."""
    components = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"line {line_no}: expected a weight and at least one item")
            theta = float(parts[0])
            assignment = np.array([int(p) for p in parts[1:]], dtype=np.int64)
            components.append((theta, PermutationRanking(assignment)))
    if not components:
        raise ValueError("policy file holds no components")
    return RankingPolicy(tuple(components))
