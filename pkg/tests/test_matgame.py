import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from stagegame.matgame import (
    MatrixGameError,
    best_pure_check,
    game_value,
    solve_matrix_game,
)


def lp_value(A):
    """Independent oracle: max v s.t. x'A >= v, x in the simplex."""
    m, n = A.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return -res.fun


def test_closed_forms():
    assert game_value([[3, 1], [0, 2]]) == pytest.approx(1.5)
    s = solve_matrix_game([[1, -1], [-1, 1]])
    assert s.value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(s.x, [0.5, 0.5])
    np.testing.assert_allclose(s.y, [0.5, 0.5])


def test_saddle_point():
    s = solve_matrix_game([[4, 2, 3], [1, 0, 5]])
    assert s.value == 2.0
    np.testing.assert_array_equal(s.x, [1, 0])
    np.testing.assert_array_equal(s.y, [0, 1, 0])


def test_degenerate_shapes():
    assert game_value([[2.0, -1.0, 5.0]]) == -1.0
    assert game_value([[2.0], [-1.0], [5.0]]) == 5.0
    assert game_value([[7.0]]) == 7.0


def test_rejects_bad_input():
    with pytest.raises(MatrixGameError):
        solve_matrix_game(np.zeros((0, 2)))
    with pytest.raises(MatrixGameError):
        solve_matrix_game([[np.inf, 0.0]])
    with pytest.raises(MatrixGameError):
        best_pure_check(np.eye(2), np.ones(3) / 3, np.ones(2) / 2)


def test_against_lp_oracle(rng):
    for _ in range(200):
        m, n = rng.integers(1, 7, size=2)
        A = rng.uniform(-3, 3, size=(m, n))
        assert game_value(A) == pytest.approx(lp_value(A), abs=1e-9)


def test_strategies_are_distributions(rng):
    for _ in range(200):
        A = rng.normal(size=tuple(rng.integers(1, 7, size=2)))
        s = solve_matrix_game(A)
        for p in (s.x, s.y):
            assert p.min() >= 0
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert best_pure_check(A, s.x, s.y) <= 1e-9


matrices = st.integers(1, 6).flatmap(
    lambda m: st.integers(1, 6).flatmap(
        lambda n: arrays(np.float64, (m, n), elements=st.floats(-10, 10, allow_subnormal=False))))


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(-5, 5))
def test_translation(A, c):
    assert game_value(A + c) == pytest.approx(game_value(A) + c, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0.01, 10))
def test_positive_homogeneity(A, k):
    assert game_value(k * A) == pytest.approx(k * game_value(A), abs=1e-9 * (1 + k))


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_player_swap(A):
    assert game_value(-A.T) == pytest.approx(-game_value(A), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(matrices, st.data())
def test_nonexpansive(A, data):
    B = A + data.draw(arrays(np.float64, A.shape, elements=st.floats(-1, 1)))
    assert abs(game_value(A) - game_value(B)) <= np.abs(A - B).max() + 1e-9


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_value_between_pure_bounds(A):
    v = game_value(A)
    assert A.min(axis=1).max() - 1e-9 <= v <= A.max(axis=0).min() + 1e-9
