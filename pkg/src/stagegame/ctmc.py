"""Continuous-time pieces: e^{tQ} for a fixed action pair, time-integrated
payoffs over a stage, and the discretized Shapley operator bar T_h.

Actions are drawn once at the start of a stage and held while the state
moves, so the generator Q(i, j) is the matrix whose row w' is
Q[w'][i][j][:].  That needs the same action sets in every state.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .game import GameSpec, SolveResult, sup_norm
from .partition import Partition
from .shapley import StageOperator, fixed_point

POISSON_TAIL = 1e-14
QUAD_TOL = 1e-12
GEN_TOL = 1e-10


class GeneratorError(ValueError):
    pass


def _check_generator(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise GeneratorError(f"generator must be square, got shape {Q.shape}")
    off = Q - np.diag(np.diag(Q))
    if off.min(initial=0.0) < 0:
        raise GeneratorError("generator has a negative off-diagonal rate")
    if np.abs(Q.sum(axis=1)).max(initial=0.0) > GEN_TOL:
        raise GeneratorError("generator rows do not sum to 0")
    return Q


def _poisson_weights(mean: float) -> np.ndarray:
    w = [math.exp(-mean)]
    total = w[0]
    k = 0
    while 1.0 - total > POISSON_TAIL and k < 10_000:
        k += 1
        w.append(w[-1] * mean / k)
        total += w[-1]
        if k > mean and w[-1] < POISSON_TAIL * 1e-3:
            break
    return np.asarray(w)


def _uniformized(Q: np.ndarray, weights: np.ndarray, rate: float) -> np.ndarray:
    S = Q.shape[0]
    P = np.eye(S) + Q / rate
    acc = np.zeros((S, S))
    power = np.eye(S)
    for wk in weights:
        acc += wk * power
        power = power @ P
    return acc


def transition_semigroup(Q, t: float) -> np.ndarray:
    """e^{tQ} by uniformization; rows sum to one by construction."""
    Q = _check_generator(Q)
    if t < 0:
        raise ValueError("t must be >= 0")
    S = Q.shape[0]
    rate = float(-np.diag(Q).min(initial=0.0))
    if t == 0.0 or rate == 0.0:
        return np.eye(S)
    squarings = 0
    while rate * t / 2**squarings > 30.0:
        squarings += 1
    w = _poisson_weights(rate * t / 2**squarings)
    P = _uniformized(Q, w / w.sum(), rate)
    for _ in range(squarings):
        P = P @ P
    P = np.clip(P, 0.0, 1.0)
    return P / P.sum(axis=1, keepdims=True)


def semigroup_integral(Q, t: float) -> np.ndarray:
    """int_0^t e^{sQ} ds from the uniformization series in closed form.

    int_0^t Pois(k; r s) ds = P(N_{rt} > k) / r.
    """
    Q = _check_generator(Q)
    S = Q.shape[0]
    rate = float(-np.diag(Q).min(initial=0.0))
    if t == 0.0:
        return np.zeros((S, S))
    if rate == 0.0:
        return t * np.eye(S)
    if rate * t > 30.0:
        half = semigroup_integral(Q, t / 2)
        return half + transition_semigroup(Q, t / 2) @ half
    w = _poisson_weights(rate * t)
    tail = np.maximum(1.0 - np.cumsum(w), 0.0)
    return _uniformized(Q, tail, rate) / rate


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, depth: int = 50):
    """Vector-valued adaptive Simpson rule with absolute tolerance ``tol``."""
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    return _simpson(f, a, b, fa, fm, fb, whole, tol, depth)


def _simpson(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or sup_norm(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1)
            + _simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1))


def pair_generator(G: GameSpec, i: int, j: int) -> np.ndarray:
    if not G.uniform_actions:
        raise GeneratorError(
            "continuous-time stages need identical action sets in every state")
    return np.array(G.generator[:, i, j, :])


def _integrated(G: GameSpec, h: float, lam: float) -> np.ndarray:
    S = G.nstates
    m, n = G.actions1[0], G.actions2[0]
    out = np.zeros_like(G.payoff)
    for i in range(m):
        for j in range(n):
            Q = pair_generator(G, i, j)
            g = G.payoff[:, i, j]
            if lam == 0.0:
                f = lambda s: transition_semigroup(Q, s) @ g
            else:
                f = lambda s: lam * math.exp(-lam * s) * (transition_semigroup(Q, s) @ g)
            out[:, i, j] = adaptive_simpson(f, 0.0, h)
    assert out.shape[0] == S
    return out


def _check_h(h: float) -> None:
    if not 0.0 < h <= 1.0:
        raise ValueError(f"h={h} outside (0, 1]")


@lru_cache(maxsize=256)
def _integrated_cached(G: GameSpec, h: float, lam: float) -> np.ndarray:
    out = _integrated(G, h, lam)
    out.setflags(write=False)
    return out


def integrated_payoff(G: GameSpec, h: float) -> np.ndarray:
    """g^h(w, i, j) = E[int_0^h g(w_t, i, j) dt | w_0 = w], padded like G.payoff."""
    _check_h(h)
    return _integrated_cached(G, float(h), 0.0)


def discounted_integrated_payoff(G: GameSpec, lam: float, h: float) -> np.ndarray:
    """E[int_0^h lam e^{-lam t} g(w_t, i, j) dt]."""
    _check_h(h)
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda={lam} outside (0, 1]")
    return _integrated_cached(G, float(h), float(lam))


@lru_cache(maxsize=256)
def stage_kernel(G: GameSpec, h: float) -> np.ndarray:
    """K[w, i, j, :] = row w of e^{h Q(i, j)}."""
    K = np.zeros_like(G.generator)
    for i in range(G.actions1[0]):
        for j in range(G.actions2[0]):
            K[:, i, j, :] = transition_semigroup(pair_generator(G, i, j), h)
    K.setflags(write=False)
    return K


def barT_operator(G: GameSpec, h: float) -> StageOperator:
    _check_h(h)
    return StageOperator.of(G, integrated_payoff(G, h), stage_kernel(G, float(h)))


def apply_barT_h(G: GameSpec, h: float, f) -> np.ndarray:
    """bar T_h f = val{g^h + P^h f} with P^h = e^{hQ}."""
    f = np.asarray(f, dtype=float)
    if f.shape != (G.nstates,):
        raise ValueError(f"value vector has shape {f.shape}, game has {G.nstates} states")
    return barT_operator(G, h)(f)


def discretized_finite_value(G: GameSpec, H: Partition) -> np.ndarray:
    """bar V_H(t) = bar T_{h_1} o ... o bar T_{h_k}(0)."""
    if len(H) == 0:
        raise ValueError("partition is empty")
    ops: dict[float, StageOperator] = {}
    z = np.zeros(G.nstates)
    for h in reversed(H.steps):
        if h not in ops:
            ops[h] = barT_operator(G, h)
        z = ops[h](z)
    return z


def discretized_discounted_value(G: GameSpec, lam: float, h: float,
                                 tol: float = 1e-10) -> SolveResult:
    """bar w^h_lam: fixed point of val[int_0^h lam e^{-lam t} g_t dt + e^{-lam h} P^h w]."""
    _check_h(h)
    reward = discounted_integrated_payoff(G, lam, h)
    c = math.exp(-lam * h)
    op = StageOperator.of(G, reward, c * stage_kernel(G, float(h)))
    res = fixed_point(op, c, tol)
    return SolveResult(res.value, res.iterations, res.residual, res.certified_error,
                       res.contraction, res.value)
