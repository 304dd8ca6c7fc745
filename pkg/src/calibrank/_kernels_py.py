"""Pure-Python matching/decomposition kernels.

Fallback for the compiled extension in ``_kernels.pyx``. Both backends run
the same algorithm with the same deterministic vertex ordering, so they
produce identical decompositions; keep them in sync.

Matchings are found with augmenting paths (Kuhn) over the strictly positive
support, warm-started between extraction steps: subtracting a coefficient can
only zero matched entries, so only the rows whose matched entry vanished need
re-augmenting.
"""

from __future__ import annotations

import numpy as np


def _augment(adjacency, row: int, visited: np.ndarray, row_to_col: np.ndarray, col_to_row: np.ndarray) -> bool:
    for col in adjacency[row]:
        if visited[col]:
            continue
        visited[col] = True
        owner = col_to_row[col]
        if owner < 0 or _augment(adjacency, owner, visited, row_to_col, col_to_row):
            row_to_col[row] = col
            col_to_row[col] = row
            return True
    return False


def perfect_matching(matrix) -> np.ndarray | None:
    """Row-for-column perfect matching on the positive support, or None.

    Returns ``match`` with ``match[j]`` = row assigned to column j. Rows are
    augmented in ascending order and columns tried in ascending order, so the
    result is deterministic.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    m = matrix.shape[0]
    adjacency = [np.flatnonzero(matrix[i] > 0.0) for i in range(m)]
    row_to_col = np.full(m, -1, dtype=np.int64)
    col_to_row = np.full(m, -1, dtype=np.int64)
    for row in range(m):
        visited = np.zeros(m, dtype=bool)
        if not _augment(adjacency, row, visited, row_to_col, col_to_row):
            return None
    return col_to_row


def bvn_extract(matrix, residual_tolerance: float):
    """Decompose a doubly stochastic matrix into weighted permutations.

    Repeatedly finds a perfect matching on the positive residual support,
    extracts it with the minimum matched entry as coefficient, and stops once
    the total residual mass drops below ``residual_tolerance``.

    Returns ``(thetas, perms)`` where ``perms[i][j]`` is the row matched to
    column j in the i-th permutation. Coefficients are returned un-normalized.

    Raises ArithmeticError when no perfect matching exists on a residual that
    still carries mass; for a genuinely doubly stochastic input that signals
    a bug, not a property of the data.
    """
    residual = np.array(matrix, dtype=np.float64, copy=True)
    m = residual.shape[0]
    if m == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=np.int32)
    max_components = (m - 1) ** 2 + 1
    adjacency = [np.flatnonzero(residual[i] > 0.0) for i in range(m)]
    row_to_col = np.full(m, -1, dtype=np.int64)
    col_to_row = np.full(m, -1, dtype=np.int64)
    pending = list(range(m))
    rows = np.arange(m)
    thetas: list[float] = []
    perms: list[np.ndarray] = []
    while float(residual.sum()) > residual_tolerance:
        for row in pending:
            visited = np.zeros(m, dtype=bool)
            if not _augment(adjacency, row, visited, row_to_col, col_to_row):
                raise ArithmeticError(
                    f"no perfect matching on residual support with mass {residual.sum():.3e} remaining"
                )
        if len(thetas) >= max_components:
            raise ArithmeticError(f"decomposition exceeded the component bound {max_components}")
        matched = residual[rows, row_to_col]
        theta = float(matched.min())
        thetas.append(theta)
        perms.append(col_to_row.astype(np.int32))
        updated = matched - theta
        updated[updated < 0.0] = 0.0
        residual[rows, row_to_col] = updated
        pending = [int(i) for i in np.flatnonzero(updated == 0.0)]
        for row in pending:
            adjacency[row] = np.flatnonzero(residual[row] > 0.0)
            col_to_row[row_to_col[row]] = -1
            row_to_col[row] = -1
    return np.array(thetas), np.vstack(perms).astype(np.int32) if perms else np.zeros((0, m), dtype=np.int32)
