# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matching/decomposition kernels.

Mirror of ``_kernels_py`` (same algorithm, same deterministic vertex order,
identical outputs); keep the two in sync.
"""

import numpy as np


cdef bint _augment(double[:, ::1] residual, Py_ssize_t row, signed char[::1] visited,
                   long long[::1] row_to_col, long long[::1] col_to_row, Py_ssize_t m):
    cdef Py_ssize_t col
    cdef long long owner
    for col in range(m):
        if residual[row, col] > 0.0 and not visited[col]:
            visited[col] = 1
            owner = col_to_row[col]
            if owner < 0 or _augment(residual, <Py_ssize_t>owner, visited, row_to_col, col_to_row, m):
                row_to_col[row] = col
                col_to_row[col] = row
                return True
    return False


def perfect_matching(matrix):
    """Row-for-column perfect matching on the positive support, or None."""
    cdef double[:, ::1] residual = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef Py_ssize_t m = residual.shape[0]
    row_to_col_arr = np.full(m, -1, dtype=np.int64)
    col_to_row_arr = np.full(m, -1, dtype=np.int64)
    visited_arr = np.zeros(m, dtype=np.int8)
    cdef long long[::1] row_to_col = row_to_col_arr
    cdef long long[::1] col_to_row = col_to_row_arr
    cdef signed char[::1] visited = visited_arr
    cdef Py_ssize_t row, j
    for row in range(m):
        for j in range(m):
            visited[j] = 0
        if not _augment(residual, row, visited, row_to_col, col_to_row, m):
            return None
    return col_to_row_arr


def bvn_extract(matrix, double residual_tolerance):
    """Decompose a doubly stochastic matrix into weighted permutations.

    Returns ``(thetas, perms)`` with ``perms[i][j]`` the row matched to
    column j of the i-th permutation; coefficients are un-normalized. Raises
    ArithmeticError when a positive-mass residual admits no perfect matching.
    """
    residual_arr = np.array(matrix, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] residual = residual_arr
    cdef Py_ssize_t m = residual.shape[0]
    if m == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=np.int32)
    cdef Py_ssize_t max_components = (m - 1) * (m - 1) + 1

    row_to_col_arr = np.full(m, -1, dtype=np.int64)
    col_to_row_arr = np.full(m, -1, dtype=np.int64)
    visited_arr = np.zeros(m, dtype=np.int8)
    cdef long long[::1] row_to_col = row_to_col_arr
    cdef long long[::1] col_to_row = col_to_row_arr
    cdef signed char[::1] visited = visited_arr

    thetas = []
    perms = []
    cdef double total, theta, value
    cdef Py_ssize_t row, col, j
    while True:
        total = 0.0
        for row in range(m):
            for col in range(m):
                total += residual[row, col]
        if total <= residual_tolerance:
            break
        for row in range(m):
            if row_to_col[row] >= 0:
                continue
            for j in range(m):
                visited[j] = 0
            if not _augment(residual, row, visited, row_to_col, col_to_row, m):
                raise ArithmeticError(
                    f"no perfect matching on residual support with mass {total:.3e} remaining"
                )
        if len(thetas) >= max_components:
            raise ArithmeticError(f"decomposition exceeded the component bound {max_components}")
        theta = residual[0, <Py_ssize_t>row_to_col[0]]
        for row in range(1, m):
            value = residual[row, <Py_ssize_t>row_to_col[row]]
            if value < theta:
                theta = value
        thetas.append(theta)
        perms.append(col_to_row_arr.astype(np.int32))
        for row in range(m):
            col = <Py_ssize_t>row_to_col[row]
            value = residual[row, col] - theta
            if value <= 0.0:
                residual[row, col] = 0.0
            else:
                residual[row, col] = value
        # Unmatch rows whose assigned entry was exhausted.
        for row in range(m):
            col = <Py_ssize_t>row_to_col[row]
            if residual[row, col] == 0.0:
                col_to_row[col] = -1
                row_to_col[row] = -1
    if perms:
        return np.array(thetas), np.vstack(perms).astype(np.int32)
    return np.zeros(0), np.zeros((0, m), dtype=np.int32)
