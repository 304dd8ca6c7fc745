"""Linear programs trading ranking relevance against calibration deviation.

Both formulations maximize (1-lam) s'Pe - lam sum(eps) subject to the induced
category distribution A'Pe staying within an elementwise slack eps of the
target. The full form optimizes over n x n doubly stochastic matrices with
zero-padded position weights; the reduced form keeps only the k exposed slot
columns (n*k + r variables instead of n^2 + r) and relaxes row sums to at
most one. Their optima coincide because the discarded columns carry no
position weight and any feasible reduced matrix can be completed to a doubly
stochastic one.

Solved with scipy's HiGHS dual simplex: deterministic for identical input
and returns vertex optima, which keeps solution supports small for the
downstream decomposition.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .core_model import (
    DoublyStochasticMatrix,
    PartialStochasticMatrix,
    RankingProblem,
    validate_problem,
)

SOLVER_METHOD = "highs-ds"
# Relative optimality target; HiGHS primal/dual feasibility defaults match it.
OPTIMALITY_TOLERANCE = 1e-7
SOLVER_SANITIZE_TOLERANCE = 1e-6


class SolverFailureError(RuntimeError):
    """LP solver did not reach an optimal solution."""

    def __init__(self, message: str, status: int | None = None, iterations: int | None = None):
        super().__init__(message)
        self.status = status
        self.iterations = iterations


class CorruptSolutionError(RuntimeError):
    """Solver output violates stochasticity beyond repairable tolerance."""


@dataclasses.dataclass(frozen=True)
class LpSolution:
    """Optimized stochastic ranking matrix with its achieved deviation slack.

    ``epsilon`` holds the elementwise deviation |A'Pe - q| of the sanitized
    matrix; ``objective`` is recomputed from the same matrix so the identity
    objective = (1-lam) s'Pe - lam sum(epsilon) holds by construction.
    """

    matrix: PartialStochasticMatrix | DoublyStochasticMatrix
    epsilon: np.ndarray
    objective: float
    solve_time_ms: float

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=np.float64)
        if eps.ndim != 1 or float(eps.min()) < 0.0:
            raise ValueError("epsilon must be a non-negative vector")
        eps.flags.writeable = False
        object.__setattr__(self, "epsilon", eps)


def _require_valid(problem: RankingProblem) -> None:
    issues = validate_problem(problem)
    if issues:
        raise ValueError("invalid problem: " + "; ".join(issues))


def _run_linprog(c, a_ub, b_ub, a_eq, b_eq, matrix_vars: int, slack_vars: int):
    # Explicit implied bounds (entries <= 1 from the column sums, slack <= 2
    # as the largest possible deviation between two distributions) do not
    # change the optimum but cut simplex iterations substantially.
    bounds = [(0.0, 1.0)] * matrix_vars + [(0.0, 2.0)] * slack_vars
    start = time.perf_counter()
    result = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method=SOLVER_METHOD)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    if result.status != 0:
        raise SolverFailureError(
            f"LP solver finished with status {result.status}: {result.message}",
            status=int(result.status),
            iterations=int(getattr(result, "nit", -1)),
        )
    return result, elapsed_ms


def solve_reduced(problem: RankingProblem) -> LpSolution:
    """Optimal top-k stochastic ranking over n*k + r variables.

    Variables are the item/slot probabilities (row-major) followed by the r
    slack entries. Columns must sum to one, rows to at most one.
    """
    _require_valid(problem)
    n, k, r = problem.n, problem.k, problem.r
    s, ehat, a, q = problem.scores, problem.position_weights, problem.categories, problem.target.probs
    lam = problem.lam

    c = np.zeros(n * k + r)
    c[: n * k] = -(1.0 - lam) * np.outer(s, ehat).ravel()
    c[n * k :] = lam

    deviation = sp.kron(sp.csr_matrix(a.T), sp.csr_matrix(ehat[None, :]), format="csr")
    eye_r = sp.identity(r, format="csr")
    row_sums = sp.kron(sp.identity(n, format="csr"), np.ones((1, k)), format="csr")
    col_sums = sp.kron(np.ones((1, n)), sp.identity(k, format="csr"), format="csr")

    a_ub = sp.vstack(
        [
            sp.hstack([deviation, -eye_r]),
            sp.hstack([-deviation, -eye_r]),
            sp.hstack([row_sums, sp.csr_matrix((n, r))]),
        ],
        format="csr",
    )
    b_ub = np.concatenate([q, -q, np.ones(n)])
    a_eq = sp.hstack([col_sums, sp.csr_matrix((k, r))], format="csr")
    b_eq = np.ones(k)

    result, elapsed_ms = _run_linprog(c, a_ub, b_ub, a_eq, b_eq, n * k, r)
    matrix = sanitize(result.x[: n * k].reshape(n, k), SOLVER_SANITIZE_TOLERANCE)
    return _build_solution(problem, matrix, ehat, elapsed_ms)


def solve_full(problem: RankingProblem) -> LpSolution:
    """Optimal ranking over the full n x n doubly stochastic family.

    Position weights are padded with zeros past slot k, so the optimum equals
    the reduced formulation's. Costs n^2 + r variables and 2r + n^2 + 2n
    constraints (non-negativity plus row/column sums plus deviation bounds).
    """
    _require_valid(problem)
    n, k, r = problem.n, problem.k, problem.r
    s, a, q = problem.scores, problem.categories, problem.target.probs
    lam = problem.lam
    e_full = np.zeros(n)
    e_full[:k] = problem.position_weights

    c = np.zeros(n * n + r)
    c[: n * n] = -(1.0 - lam) * np.outer(s, e_full).ravel()
    c[n * n :] = lam

    deviation = sp.kron(sp.csr_matrix(a.T), sp.csr_matrix(e_full[None, :]), format="csr")
    eye_r = sp.identity(r, format="csr")
    row_sums = sp.kron(sp.identity(n, format="csr"), np.ones((1, n)), format="csr")
    col_sums = sp.kron(np.ones((1, n)), sp.identity(n, format="csr"), format="csr")

    a_ub = sp.hstack([sp.vstack([deviation, -deviation]), sp.vstack([-eye_r, -eye_r])], format="csr")
    b_ub = np.concatenate([q, -q])
    a_eq = sp.hstack([sp.vstack([row_sums, col_sums]), sp.csr_matrix((2 * n, r))], format="csr")
    b_eq = np.ones(2 * n)

    result, elapsed_ms = _run_linprog(c, a_ub, b_ub, a_eq, b_eq, n * n, r)
    matrix = _sanitize_square(result.x[: n * n].reshape(n, n), SOLVER_SANITIZE_TOLERANCE)
    return _build_solution(problem, matrix, e_full, elapsed_ms)


def _build_solution(problem, matrix, weights, elapsed_ms) -> LpSolution:
    induced = problem.categories.T @ (matrix.values @ weights)
    epsilon = np.abs(induced - problem.target.probs)
    relevance = float(problem.scores @ matrix.values @ weights)
    objective = (1.0 - problem.lam) * relevance - problem.lam * float(epsilon.sum())
    return LpSolution(matrix=matrix, epsilon=epsilon, objective=objective, solve_time_ms=elapsed_ms)


def sanitize(raw, tolerance: float, row_items=None) -> PartialStochasticMatrix:
    """Repair solver float dirt into an exactly column-stochastic matrix.

    Entries below ``-tolerance``, column sums off by more than ``tolerance``
    or row sums above ``1 + tolerance`` indicate a corrupt solution and raise;
    anything smaller is clamped, rescaled and clipped until the invariants
    hold at 1e-12.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    low = float(raw.min())
    if low < -tolerance:
        i, j = np.unravel_index(int(raw.argmin()), raw.shape)
        raise CorruptSolutionError(f"entry ({i}, {j}) = {low} below -{tolerance}")
    col_sums = raw.sum(axis=0)
    worst = int(np.abs(col_sums - 1.0).argmax())
    if abs(col_sums[worst] - 1.0) > tolerance:
        raise CorruptSolutionError(f"column {worst} sums to {col_sums[worst]}, off by more than {tolerance}")
    row_sums = raw.sum(axis=1)
    if float(row_sums.max()) > 1.0 + tolerance:
        raise CorruptSolutionError(f"row {int(row_sums.argmax())} sums to {row_sums.max()} > 1 + {tolerance}")

    values = np.clip(raw, 0.0, None)
    values = values / values.sum(axis=0)
    _shift_row_excess(values)
    if (
        float(values.sum(axis=1).max()) > 1.0 + 1e-12
        or float(np.abs(values.sum(axis=0) - 1.0).max()) > 1e-12
    ):
        raise CorruptSolutionError("stochasticity repair did not converge")
    if row_items is None:
        row_items = range(values.shape[0])
    return PartialStochasticMatrix(values, tuple(row_items))


def _shift_row_excess(values: np.ndarray) -> None:
    """Move row mass above one into rows with slack, column by column.

    Rescaling cannot fix a row whose excess sits in columns it dominates (the
    column renormalization undoes the row scaling exactly), so the dirt is
    shifted between rows instead, which leaves every column sum untouched.
    Receivers already holding mass in the column are preferred so no new
    support entries appear unless unavoidable.
    """
    row_sums = values.sum(axis=1)
    n = values.shape[0]
    for i in np.flatnonzero(row_sums > 1.0):
        excess = row_sums[i] - 1.0
        for j in np.argsort(-values[i]):
            if excess <= 0.0 or values[i, j] <= 0.0:
                break
            slack = 1.0 - row_sums
            slack[i] = 0.0
            in_column = (values[:, j] > 0.0) & (slack > 0.0)
            if np.any(in_column):
                recv = int(np.flatnonzero(in_column)[slack[in_column].argmax()])
            elif float(slack.max()) > 0.0:
                recv = int(slack.argmax())
            else:
                break
            amount = min(excess, float(values[i, j]), float(slack[recv]))
            values[i, j] -= amount
            values[recv, j] += amount
            row_sums[i] -= amount
            row_sums[recv] += amount
            excess -= amount


def _sanitize_square(raw, tolerance: float, item_map=None) -> DoublyStochasticMatrix:
    """Square variant of :func:`sanitize` normalizing both rows and columns."""
    raw = np.asarray(raw, dtype=np.float64)
    low = float(raw.min())
    if low < -tolerance:
        i, j = np.unravel_index(int(raw.argmin()), raw.shape)
        raise CorruptSolutionError(f"entry ({i}, {j}) = {low} below -{tolerance}")
    for axis, name in ((1, "row"), (0, "column")):
        sums = raw.sum(axis=axis)
        worst = int(np.abs(sums - 1.0).argmax())
        if abs(sums[worst] - 1.0) > tolerance:
            raise CorruptSolutionError(f"{name} {worst} sums to {sums[worst]}, off by more than {tolerance}")
    values = np.clip(raw, 0.0, None)
    values = values / values.sum(axis=0)
    # Column sums are exactly one, so row excesses balance row deficits and
    # shifting drives every row sum to one as well.
    _shift_row_excess(values)
    if (
        float(np.abs(values.sum(axis=1) - 1.0).max()) > 1e-12
        or float(np.abs(values.sum(axis=0) - 1.0).max()) > 1e-12
    ):
        raise CorruptSolutionError("stochasticity repair did not converge")
    if item_map is None:
        item_map = range(values.shape[0])
    return DoublyStochasticMatrix(values, tuple(item_map))
