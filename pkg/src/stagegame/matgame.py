"""Value and optimal mixed strategies of finite zero-sum matrix games.

The row player maximizes.  Every Shapley-type operator in the package calls
:func:`matrix_game_value` once per state, so the solver lives in a compiled
kernel; :func:`solve_matrix_game` is the checked Python entry point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

FEAS_TOL = 1e-10
GUARANTEE_TOL = 1e-9


class MatrixGameError(ValueError):
    pass


@dataclass(frozen=True)
class MinimaxSolution:
    value: float
    x: np.ndarray
    y: np.ndarray
    pivots: int = 0


@njit(cache=True, nogil=True)
def _pure_scan(A, m, n, x, y):
    # 1 x n or m x 1: the single-move player is passive
    if m == 1:
        jb = 0
        for j in range(1, n):
            if A[0, j] < A[0, jb]:
                jb = j
        x[0] = 1.0
        y[jb] = 1.0
        return A[0, jb]
    ib = 0
    for i in range(1, m):
        if A[i, 0] > A[ib, 0]:
            ib = i
    x[ib] = 1.0
    y[0] = 1.0
    return A[ib, 0]


@njit(cache=True, nogil=True)
def _saddle(A, m, n, x, y):
    for i in range(m):
        rmin = A[i, 0]
        for j in range(1, n):
            if A[i, j] < rmin:
                rmin = A[i, j]
        for j in range(n):
            if A[i, j] != rmin:
                continue
            ok = True
            for k in range(m):
                if A[k, j] > rmin:
                    ok = False
                    break
            if ok:
                x[i] = 1.0
                y[j] = 1.0
                return True, rmin
    return False, 0.0


@njit(cache=True, nogil=True)
def _simplex(A, m, n, x, y):
    """Bland-rule simplex on  max 1'q  s.t.  (A + shift) q <= 1, q >= 0.

    With B = A + shift > 0 the optimum is 1/val(B); the column player's
    strategy is q / 1'q and the row player's is read off the reduced costs
    of the slack columns.
    """
    amin = A[0, 0]
    for i in range(m):
        for j in range(n):
            if A[i, j] < amin:
                amin = A[i, j]
    shift = 1.0 - amin
    ncol = n + m + 1
    rhs = n + m
    T = np.zeros((m + 1, ncol))
    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        for j in range(n):
            T[i, j] = A[i, j] + shift
        T[i, n + i] = 1.0
        T[i, rhs] = 1.0
        basis[i] = n + i
    for j in range(n):
        T[m, j] = -1.0

    max_pivots = 50 * (m + n) + 100
    pivots = 0
    while True:
        col = -1
        for j in range(n + m):
            if T[m, j] < -FEAS_TOL:
                col = j
                break
        if col < 0:
            break
        row = -1
        best = 0.0
        for i in range(m):
            a = T[i, col]
            if a > FEAS_TOL:
                ratio = T[i, rhs] / a
                if row < 0 or ratio < best - 1e-13 or (
                        abs(ratio - best) <= 1e-13 and basis[i] < basis[row]):
                    row = i
                    best = ratio
        if row < 0 or pivots >= max_pivots:
            # bounded feasible region and Bland's rule: not reachable in theory
            return np.nan, pivots
        piv = T[row, col]
        for j in range(ncol):
            T[row, j] /= piv
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    for j in range(ncol):
                        T[i, j] -= f * T[row, j]
        basis[row] = col
        pivots += 1

    z = T[m, rhs]
    sx = 0.0
    for i in range(m):
        p = T[m, n + i]
        if p < 0.0:
            p = 0.0
        x[i] = p
        sx += p
    sy = 0.0
    for i in range(m):
        if basis[i] < n:
            q = T[i, rhs]
            if q < 0.0:
                q = 0.0
            y[basis[i]] = q
            sy += q
    for i in range(m):
        x[i] /= sx
    for j in range(n):
        y[j] /= sy
    return 1.0 / z - shift, pivots


@njit(cache=True, nogil=True)
def matrix_game_value(A, m, n, x, y):
    """val of the leading m x n block of A; optimal strategies go to x, y.

    x and y must have room for m and n entries; they are overwritten.
    """
    for i in range(m):
        x[i] = 0.0
    for j in range(n):
        y[j] = 0.0
    if m == 1 or n == 1:
        return _pure_scan(A, m, n, x, y)
    found, v = _saddle(A, m, n, x, y)
    if found:
        return v
    for i in range(m):
        x[i] = 0.0
    for j in range(n):
        y[j] = 0.0
    v, _ = _simplex(A, m, n, x, y)
    return v


def _as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise MatrixGameError(f"need a non-empty 2-d payoff matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise MatrixGameError("payoff matrix has non-finite entries")
    return np.ascontiguousarray(A)


def solve_matrix_game(A) -> MinimaxSolution:
    """Solve ``max_x min_y x'Ay`` and return the value with optimal strategies.

    >>> solve_matrix_game([[3, 1], [0, 2]]).value
    1.5
    """
    A = _as_matrix(A)
    m, n = A.shape
    x = np.zeros(m)
    y = np.zeros(n)
    pivots = 0
    if m == 1 or n == 1:
        v = _pure_scan(A, m, n, x, y)
    else:
        found, v = _saddle(A, m, n, x, y)
        if not found:
            x[:] = 0.0
            y[:] = 0.0
            v, pivots = _simplex(A, m, n, x, y)
    if not np.isfinite(v):
        raise MatrixGameError(f"simplex failed to terminate on a {m}x{n} game")
    return MinimaxSolution(float(v), x, y, int(pivots))


def best_pure_check(A, x, y) -> float:
    """Largest gain either player gets from a pure deviation against (x, y)."""
    A = _as_matrix(A)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (A.shape[0],) or y.shape != (A.shape[1],):
        raise MatrixGameError(
            f"strategy shapes {x.shape}, {y.shape} do not match matrix {A.shape}")
    pay = x @ A @ y
    return float(max((A @ y).max() - pay, pay - (x @ A).min()))


def game_value(A) -> float:
    return solve_matrix_game(A).value
