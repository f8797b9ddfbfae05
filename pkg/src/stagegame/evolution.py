"""The evolution equation f' = (T - Id) f, Euler schemes over step partitions,
partition-game values and discounted products of D^h_lam.

Error control for the flow rests on two facts about a sup-norm
nonexpansive T: the flow is itself nonexpansive, and |F(z_k)| with
F = T - Id is nonincreasing along an Euler scheme.  One Euler step of
length d from y then lands within d^2 |F(y)| of the flow, so the scheme
error at time t is at most sum_k d_k^2 |F(z_k)|.  The a priori bound
|F(z)| sqrt((sigma_k - t)^2 + tau_k) is also available; the smaller of the
two is reported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from . import ctmc
from .game import GameSpec, SolveResult, sup_norm
from .matgame import matrix_game_value, solve_matrix_game
from .partition import Partition
from .shapley import shapley_operator, stage_values

MAX_EULER_STEPS = 10**8
MAX_PRODUCT_STEPS = 10**7
ROUNDOFF = 1e-12


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolutionResult:
    f: np.ndarray
    t: float
    steps_used: int
    certified_error: float
    method: str = "euler"


@njit(cache=True, nogil=True)
def _euler_segments(r, K, m, n, z0, seg_step, seg_count, out, cert, tau):
    S = z0.shape[0]
    z = z0.copy()
    Tz = np.empty(S)
    X = np.zeros((S, r.shape[1]))
    Y = np.zeros((S, r.shape[2]))
    acc = 0.0
    tsq = 0.0
    for s in range(seg_step.shape[0]):
        d = seg_step[s]
        for _ in range(seg_count[s]):
            stage_values(r, K, m, n, z, Tz, X, Y)
            fn = 0.0
            for w in range(S):
                diff = Tz[w] - z[w]
                if abs(diff) > fn:
                    fn = abs(diff)
                z[w] += d * diff
            acc += d * d * fn
            tsq += d * d
        out[s] = z
        cert[s] = acc
        tau[s] = tsq


@njit(cache=True, nogil=True)
def _fractional_steps(r, K, m, n, z0, steps):
    """z_{k+1} = (1 - h_{k+1}) z_k + h_{k+1} T z_k."""
    S = z0.shape[0]
    z = z0.copy()
    Tz = np.empty(S)
    X = np.zeros((S, r.shape[1]))
    Y = np.zeros((S, r.shape[2]))
    for k in range(steps.shape[0]):
        h = steps[k]
        stage_values(r, K, m, n, z, Tz, X, Y)
        for w in range(S):
            z[w] = (1.0 - h) * z[w] + h * Tz[w]
    return z


@njit(cache=True, nogil=True)
def _duration_chain(g, Q, m, n, lam, steps, z0):
    """D^{h_1} o ... o D^{h_n}(z0), applying steps[-1] first.

    D^h z = val[lam h g + (1 - lam h)(z(w) + h Q z)].
    """
    S = z0.shape[0]
    z = z0.copy()
    new = np.empty(S)
    M = np.empty((g.shape[1], g.shape[2]))
    x = np.empty(g.shape[1])
    y = np.empty(g.shape[2])
    for k in range(steps.shape[0] - 1, -1, -1):
        h = steps[k]
        a = lam * h
        b = 1.0 - lam * h
        for w in range(S):
            for i in range(m[w]):
                for j in range(n[w]):
                    qz = 0.0
                    for v in range(S):
                        qz += Q[w, i, j, v] * z[v]
                    M[i, j] = a * g[w, i, j] + b * (z[w] + h * qz)
            new[w] = matrix_game_value(M, m[w], n[w], x, y)
        z[:] = new
    return z


def affine_form(G: GameSpec):
    """(c, Pbar) with T f = c + Pbar f when no state's transition depends on
    the actions; None otherwise."""
    S = G.nstates
    c = np.empty(S)
    Pbar = np.empty((S, S))
    for w in range(S):
        g, q = G.block(w)
        rows = q.reshape(-1, S)
        if not np.all(rows == rows[0]):
            return None
        c[w] = solve_matrix_game(g).value
        Pbar[w] = rows[0]
        Pbar[w, w] += 1.0
    return c, Pbar


def _exact_flow(c, Pbar, z, t):
    # f' = c + (Pbar - Id) f is linear with a stochastic-generator matrix
    Qbar = Pbar - np.eye(len(z))
    return ctmc.transition_semigroup(Qbar, t) @ z + ctmc.semigroup_integral(Qbar, t) @ c


def euler_steps_needed(F0: float, t: float, tol: float) -> int:
    if F0 == 0.0 or t == 0.0:
        return 1
    first_order = t * t * F0 / tol
    a_priori = (t * F0 / tol) ** 2
    return max(1, math.ceil(min(first_order, a_priori)))


def evolve_times(G: GameSpec, z, times: Sequence[float], tol: float = 1e-6,
                 method: str = "auto") -> list[EvolutionResult]:
    """Flow from z sampled at sorted nonnegative ``times``, each within ``tol``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (G.nstates,):
        raise ValueError(f"value vector has shape {z.shape}, game has {G.nstates} states")
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise ValueError("evolution times must be >= 0")
    if times != sorted(times):
        raise ValueError("evolution times must be sorted")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not times:
        return []
    T = shapley_operator(G)
    F0 = sup_norm(T(z) - z)
    if F0 == 0.0:
        return [EvolutionResult(z.copy(), t, 0, 0.0, "stationary") for t in times]

    if method in ("auto", "exact"):
        form = affine_form(G)
        if form is not None:
            scale = 1.0 + sup_norm(z) + sup_norm(form[0]) * max(times)
            return [EvolutionResult(_exact_flow(*form, z, t), t, 0, ROUNDOFF * scale, "exact")
                    for t in times]
        if method == "exact":
            raise EvolutionError("transitions depend on actions; no closed-form flow")

    tmax = times[-1]
    nsteps = euler_steps_needed(F0, tmax, tol)
    if nsteps > MAX_EULER_STEPS:
        raise EvolutionError(
            f"certifying tol={tol:g} up to t={tmax:g} needs step {tmax / nsteps:.3e} "
            f"({nsteps} steps > {MAX_EULER_STEPS})")
    delta = tmax / nsteps
    seg_step, seg_count = [], []
    prev = 0.0
    for t in times:
        span = t - prev
        k = math.ceil(span / delta - 1e-9) if span > 0 else 0
        seg_count.append(k)
        seg_step.append(span / k if k else 0.0)
        prev = t
    seg_step = np.asarray(seg_step)
    seg_count = np.asarray(seg_count, dtype=np.int64)
    out = np.empty((len(times), G.nstates))
    cert = np.empty(len(times))
    tau = np.empty(len(times))
    _euler_segments(T.reward, T.kernel, T.m, T.n, z, seg_step, seg_count, out, cert, tau)
    used = np.cumsum(seg_count)
    return [EvolutionResult(out[k], t, int(used[k]),
                            float(min(cert[k], F0 * math.sqrt(tau[k]))), "euler")
            for k, t in enumerate(times)]


def evolve(G: GameSpec, z, t: float, tol: float = 1e-6, method: str = "auto") -> EvolutionResult:
    """f_t(z) for f' = (T - Id) f, f_0 = z, within ``tol`` in sup norm."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return evolve_times(G, z, [t], tol, method)[0]


def limit_value(G: GameSpec, t: float, tol: float = 1e-6) -> np.ndarray:
    """hat V_t = f_t(0), the vanishing-mesh limit of partition-game values."""
    if t <= 0:
        raise ValueError("t must be > 0")
    return evolve(G, np.zeros(G.nstates), t, tol).f


def _steps_array(H) -> np.ndarray:
    steps = np.asarray(H.steps if isinstance(H, Partition) else list(H), dtype=float)
    Partition(tuple(steps))  # validates
    return steps


def euler_scheme(G: GameSpec, z, H) -> np.ndarray:
    """z_k after z_{i} = T_{h_i} z_{i-1}, i = 1..k (h_1 applied first)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (G.nstates,):
        raise ValueError(f"value vector has shape {z.shape}, game has {G.nstates} states")
    steps = _steps_array(H)
    T = shapley_operator(G)
    return _fractional_steps(T.reward, T.kernel, T.m, T.n, np.ascontiguousarray(z), steps)


def power_T(G: GameSpec, z, n: int) -> np.ndarray:
    """T^n z."""
    return euler_scheme(G, z, [1.0] * n) if n else np.asarray(z, dtype=float).copy()


def partition_value(G: GameSpec, H: Partition):
    """U(H) = T_{h_1} o ... o T_{h_k}(0) and u(H) = U(H) / t.

    Stage 1 lasts h_1, so T_{h_k} acts first; the Euler scheme runs over
    the reversed partition.
    """
    if len(H) == 0:
        raise ValueError("partition is empty")
    U = euler_scheme(G, np.zeros(G.nstates), H.reversed())
    return U, U / H.total


def discounted_product(G: GameSpec, lam: float, H, tol: float = 1e-10) -> SolveResult:
    """W^H_lam = lim_n D^{h_1} o ... o D^{h_n}(0).

    ``H`` is an iterable of step sizes (a finite Partition is cycled).  The
    product is cut at the first n with prod (1 - lam h_i) <= tol / (|T(0)| + 1);
    since every tail product maps into the ball of radius |T(0)|, the cut
    costs at most tol.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda={lam} outside (0, 1]")
    steps = itertools.cycle(H.steps) if isinstance(H, Partition) else iter(H)
    T0 = sup_norm(shapley_operator(G)(np.zeros(G.nstates)))
    target = tol / (T0 + 1.0)
    taken: list[float] = []
    contraction = 1.0
    while contraction > target:
        if len(taken) >= MAX_PRODUCT_STEPS:
            raise EvolutionError("step sequence too slow to certify the discounted product")
        try:
            h = float(next(steps))
        except StopIteration:
            raise EvolutionError(
                f"step generator exhausted after {len(taken)} steps "
                f"(contraction {contraction:.3e} > {target:.3e})") from None
        if not 0.0 < h <= 1.0:
            raise ValueError(f"step {h} outside (0, 1]")
        taken.append(h)
        contraction *= 1.0 - lam * h
    inner = finite_product(G, lam, taken[1:], np.zeros(G.nstates))
    z = finite_product(G, lam, taken[:1], inner)
    return SolveResult(z, len(taken), sup_norm(z - inner), contraction * T0, contraction, z)


def finite_product(G: GameSpec, lam: float, steps: Sequence[float], z) -> np.ndarray:
    """D^{h_1} o ... o D^{h_n}(z)."""
    z = np.ascontiguousarray(z, dtype=float)
    steps = np.asarray(list(steps), dtype=float)
    if steps.size == 0:
        return z.copy()
    return _duration_chain(G.payoff, G.generator, np.asarray(G.actions1, dtype=np.int64),
                           np.asarray(G.actions2, dtype=np.int64), float(lam), steps, z)
