"""Exact zero-sum matrix game solver.

Convention: A[u][v] is what the column player (minimizer) pays the row
player (maximizer).  The game value and one optimal mixed strategy per
player are computed with a dense simplex method (Bland's anti-cycling
rule) on the standard positive-matrix LP pair, so output is deterministic
for a given matrix.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_PIVOTS = 10_000
_LP_TOL = 1e-9
CERT_TOL = 1e-8


class NumericalFailure(RuntimeError):
    """The simplex did not terminate within the pivot cap."""


@dataclass
class GameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


@njit(cache=True)
def _simplex_max(B, max_pivots):
    """Maximize sum(y) subject to B y <= 1, y >= 0 for B > 0.

    Returns (status, objective, y, duals); status 0 = optimal, 1 = pivot cap
    hit, 2 = unbounded column (cannot occur for positive B).
    Bland's rule: entering = lowest-index improving column, leaving =
    min-ratio with lowest basis index on ties.
    """
    nrow, ncol = B.shape
    width = ncol + nrow + 1
    T = np.zeros((nrow, width))
    T[:, :ncol] = B
    for i in range(nrow):
        T[i, ncol + i] = 1.0
        T[i, width - 1] = 1.0
    z = np.zeros(width)
    z[:ncol] = -1.0
    basis = np.empty(nrow, dtype=np.int64)
    for i in range(nrow):
        basis[i] = ncol + i

    for _ in range(max_pivots):
        enter = -1
        for j in range(width - 1):
            if z[j] < -_LP_TOL:
                enter = j
                break
        if enter < 0:
            y = np.zeros(ncol)
            duals = np.zeros(nrow)
            for i in range(nrow):
                if basis[i] < ncol:
                    y[basis[i]] = T[i, width - 1]
            for i in range(nrow):
                duals[i] = z[ncol + i]
            return 0, z[width - 1], y, duals
        leave = -1
        best_ratio = 0.0
        for i in range(nrow):
            if T[i, enter] > _LP_TOL:
                ratio = T[i, width - 1] / T[i, enter]
                if leave < 0 or ratio < best_ratio - _LP_TOL or (
                        ratio < best_ratio + _LP_TOL and basis[i] < basis[leave]):
                    leave = i
                    best_ratio = ratio
        if leave < 0:
            return 2, 0.0, np.zeros(ncol), np.zeros(nrow)
        piv = T[leave, enter]
        T[leave, :] /= piv
        for i in range(nrow):
            if i != leave and T[i, enter] != 0.0:
                T[i, :] -= T[i, enter] * T[leave, :]
        if z[enter] != 0.0:
            z -= z[enter] * T[leave, :]
        basis[leave] = enter
    return 1, 0.0, np.zeros(ncol), np.zeros(nrow)


def _shift(A: np.ndarray) -> float:
    return 1.0 + max(0.0, -float(A.min()))


def _solve_raw(A: np.ndarray, max_pivots: int):
    A = np.ascontiguousarray(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.size == 0:
        raise ValueError("matrix game must be a nonempty 2-d array")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix game entries must be finite")
    gamma = _shift(A)
    status, obj, y, duals = _simplex_max(A + gamma, max_pivots)
    if status == 1:
        raise NumericalFailure(f"simplex exceeded {max_pivots} pivots")
    if status == 2 or obj <= 0.0:
        raise NumericalFailure("simplex failed on positive matrix (degenerate input?)")
    return gamma, obj, y, duals


def solve(A, max_pivots: int = MAX_PIVOTS) -> GameSolution:
    """Value and one optimal mixed strategy per player."""
    A = np.asarray(A, dtype=float)
    gamma, obj, y, duals = _solve_raw(A, max_pivots)
    value = 1.0 / obj - gamma
    col = y / y.sum()
    row = duals / duals.sum()
    return GameSolution(value, row, col)


def solve_value(A, max_pivots: int = MAX_PIVOTS) -> float:
    """Game value only (hot path of the Shapley operator)."""
    gamma, obj, _, _ = _solve_raw(np.asarray(A, dtype=float), max_pivots)
    return 1.0 / obj - gamma


def best_response_value(A, opponent, side: str):
    """Best pure response against a fixed opponent mixed action.

    side='row': opponent is the column mix, returns (max_u (A @ opp)[u], u*).
    side='col': opponent is the row mix, returns (min_v (opp @ A)[v], v*).
    Ties break to the lowest index.
    """
    A = np.asarray(A, dtype=float)
    opp = np.asarray(opponent, dtype=float)
    if side == "row":
        payoffs = A @ opp
        idx = int(np.argmax(payoffs))
    elif side == "col":
        payoffs = opp @ A
        idx = int(np.argmin(payoffs))
    else:
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    return float(payoffs[idx]), idx


def certify(A, sol: GameSolution, tol: float = CERT_TOL) -> bool:
    """Saddle certificate: each strategy guarantees the value against every
    pure response, up to tol."""
    A = np.asarray(A, dtype=float)
    lo, _ = best_response_value(A, sol.row_strategy, "col")
    hi, _ = best_response_value(A, sol.col_strategy, "row")
    return lo >= sol.value - tol and hi <= sol.value + tol
