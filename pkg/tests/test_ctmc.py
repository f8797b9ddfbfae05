import math

import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import expm

from stagegame import ctmc
from stagegame.game import fixture, random_game
from stagegame.partition import Partition


def random_generator(rng, S, scale=1.0):
    Q = rng.uniform(0, scale, size=(S, S))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


@pytest.mark.parametrize("t", [0.0, 0.01, 0.3, 1.0, 7.5, 80.0])
def test_semigroup_matches_expm(rng, t):
    for S in (1, 2, 4):
        Q = random_generator(rng, S)
        P = ctmc.transition_semigroup(Q, t)
        np.testing.assert_allclose(P, expm(t * Q), atol=1e-12)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("t", [0.2, 1.0, 3.0, 45.0])
def test_semigroup_integral_matches_block_expm(rng, t):
    S = 3
    Q = random_generator(rng, S)
    block = np.zeros((2 * S, 2 * S))
    block[:S, :S] = Q
    block[:S, S:] = np.eye(S)
    ref = expm(t * block)[:S, S:]
    np.testing.assert_allclose(ctmc.semigroup_integral(Q, t), ref, atol=1e-11 * max(1, t))


def test_generator_validation():
    with pytest.raises(ctmc.GeneratorError):
        ctmc.transition_semigroup([[-1.0, 0.5], [0.0, 0.0]], 1.0)
    with pytest.raises(ctmc.GeneratorError):
        ctmc.transition_semigroup([[1.0, -1.0], [0.0, 0.0]], 1.0)
    with pytest.raises(ValueError):
        ctmc.transition_semigroup(np.zeros((2, 2)), -1.0)


def test_adaptive_simpson():
    assert ctmc.adaptive_simpson(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-11)
    out = ctmc.adaptive_simpson(lambda s: np.array([s, s * s]), 0.0, 1.0)
    np.testing.assert_allclose(out, [0.5, 1 / 3], atol=1e-13)


def test_fixabs_integrated_payoff(fixabs):
    for h in (0.025, 0.5, 1.0):
        gh = ctmc.integrated_payoff(fixabs, h)
        assert gh[0, 0, 0] == pytest.approx(1 - math.exp(-h), abs=1e-12)
        assert gh[1, 0, 0] == 0.0


def test_integrated_payoff_against_quad(rgame):
    h = 0.7
    gh = ctmc.integrated_payoff(rgame, h)
    gl = ctmc.discounted_integrated_payoff(rgame, 0.4, h)
    for i in range(2):
        for j in range(2):
            Q = rgame.generator[:, i, j, :]
            g = rgame.payoff[:, i, j]
            ref, _ = quad_vec(lambda s: expm(s * Q) @ g, 0, h, epsabs=1e-13)
            np.testing.assert_allclose(gh[:, i, j], ref, atol=1e-11)
            # discounted: lam int e^{s(Q - lam)} ds g
            ref_l, _ = quad_vec(lambda s: 0.4 * math.exp(-0.4 * s) * (expm(s * Q) @ g), 0, h,
                                epsabs=1e-13)
            np.testing.assert_allclose(gl[:, i, j], ref_l, atol=1e-11)


def test_stage_kernel_rows(rgame):
    K = ctmc.stage_kernel(rgame, 0.5)
    np.testing.assert_allclose(K.sum(axis=-1), 1.0, atol=1e-14)
    np.testing.assert_allclose(K[:, 1, 0, :], expm(0.5 * rgame.generator[:, 1, 0, :]), atol=1e-12)


def test_barT_is_close_to_T_h(rgame, rng):
    from stagegame.shapley import apply_T_h
    f = rng.uniform(-1, 1, rgame.nstates)
    gaps = [np.abs(apply_T_h(rgame, h, f) - ctmc.apply_barT_h(rgame, h, f)).max() for h in (0.2, 0.1, 0.05)]
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] / gaps[1] == pytest.approx(0.25, rel=0.2)


def test_fixabs_discretized_values(fixabs):
    V = ctmc.discretized_finite_value(fixabs, Partition((0.5, 0.5)))
    assert V[0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    V = ctmc.discretized_finite_value(fixabs, Partition((0.3, 0.2, 0.5)))
    assert V[0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    for lam in (0.1, 0.5, 0.9):
        for h in (0.4, 0.05):
            w = ctmc.discretized_discounted_value(fixabs, lam, h).value
            assert w[0] == pytest.approx(lam / (1 + lam), abs=1e-9)


def test_discretized_value_is_exact_in_one_state():
    G = fixture("FIX-MP")
    assert ctmc.discretized_finite_value(G, Partition.uniform(1, 4))[0] == pytest.approx(0.0, abs=1e-12)


def test_ragged_games_rejected():
    G = random_game(1, nstates=3, nactions=3, ragged=True)
    assert not G.uniform_actions
    with pytest.raises(ctmc.GeneratorError):
        ctmc.integrated_payoff(G, 0.5)


def test_range_errors(fixabs):
    with pytest.raises(ValueError):
        ctmc.integrated_payoff(fixabs, 0.0)
    with pytest.raises(ValueError):
        ctmc.discounted_integrated_payoff(fixabs, 2.0, 0.5)
    with pytest.raises(ValueError):
        ctmc.discretized_finite_value(fixabs, Partition(()))
