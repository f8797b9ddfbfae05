"""Shapley operators and their stage-duration variants.

Every operator here has the one-stage form

    (Phi z)(w) = val_{i,j} [ r(w,i,j) + sum_w' K(w,i,j,w') z(w') ]

for some reward tensor r and nonnegative kernel K.  :class:`StageOperator`
holds (r, K) and evaluates Phi with the compiled matrix-game kernel; the
public functions build the right (r, K) for T, T_h, D^h_lam, tilde T_alpha
and their discounted fixed points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .game import GameSpec, SolveResult, sup_norm
from .matgame import matrix_game_value


MAX_ITER = 10**7
DEBUG_TOL = 1e-12


class FixedPointError(RuntimeError):
    pass


@njit(cache=True, nogil=True)
def stage_values(r, K, m, n, z, out, X, Y):
    S = z.shape[0]
    M = np.empty((r.shape[1], r.shape[2]))
    for w in range(S):
        for i in range(m[w]):
            for j in range(n[w]):
                s = r[w, i, j]
                for v in range(S):
                    s += K[w, i, j, v] * z[v]
                M[i, j] = s
        out[w] = matrix_game_value(M, m[w], n[w], X[w], Y[w])


@njit(cache=True, nogil=True)
def policy_system(r, K, m, n, X, Y):
    """Reward vector and kernel matrix when (X, Y) is played in every state."""
    S = r.shape[0]
    rxy = np.zeros(S)
    Kxy = np.zeros((S, S))
    for w in range(S):
        for i in range(m[w]):
            xi = X[w, i]
            if xi == 0.0:
                continue
            for j in range(n[w]):
                p = xi * Y[w, j]
                if p == 0.0:
                    continue
                rxy[w] += p * r[w, i, j]
                for v in range(S):
                    Kxy[w, v] += p * K[w, i, j, v]
    return rxy, Kxy


@dataclass(frozen=True, eq=False)
class StageOperator:
    reward: np.ndarray  # (S, M, N)
    kernel: np.ndarray  # (S, M, N, S)
    m: np.ndarray
    n: np.ndarray

    @classmethod
    def of(cls, G: GameSpec, reward, kernel) -> "StageOperator":
        return cls(np.ascontiguousarray(reward, dtype=float),
                   np.ascontiguousarray(kernel, dtype=float),
                   np.asarray(G.actions1, dtype=np.int64),
                   np.asarray(G.actions2, dtype=np.int64))

    @property
    def nstates(self) -> int:
        return self.reward.shape[0]

    def solve(self, z):
        z = np.ascontiguousarray(z, dtype=float)
        S, M, N = self.reward.shape
        out = np.empty(S)
        X = np.zeros((S, M))
        Y = np.zeros((S, N))
        stage_values(self.reward, self.kernel, self.m, self.n, z, out, X, Y)
        return out, X, Y

    def __call__(self, z) -> np.ndarray:
        return self.solve(z)[0]

    def policy_value(self, X, Y) -> np.ndarray:
        rxy, Kxy = policy_system(self.reward, self.kernel, self.m, self.n, X, Y)
        return np.linalg.solve(np.eye(self.nstates) - Kxy, rxy)


def fixed_point(op: StageOperator, contraction: float, tol: float,
                max_iter: int = MAX_ITER, accelerate: bool = True) -> SolveResult:
    """Certified fixed point of a ``contraction``-Lipschitz stage operator.

    Iterates from 0 and stops once ``|z_{k+1} - z_k| <= tol (1-c)/c``, which
    bounds the distance of z_{k+1} to the fixed point by tol.  With
    ``accelerate`` each round also tries the exact value of the stationary
    strategies optimal at the current iterate, kept only when its residual
    beats what a plain step guarantees; the stopping test is unchanged.
    """
    c = float(contraction)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"contraction factor {c} not in [0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = np.zeros(op.nstates)
    Tz, X, Y = op.solve(z)
    it = 1
    while True:
        res = sup_norm(Tz - z)
        if c == 0.0 or c * res <= tol * (1.0 - c):
            cert = 0.0 if c == 0.0 else c * res / (1.0 - c)
            return SolveResult(Tz, it, res, cert, c)
        if it >= max_iter:
            raise FixedPointError(
                f"no certificate after {it} iterations (residual {res:.3e}, tol {tol:.1e})")
        if accelerate:
            try:
                cand = op.policy_value(X, Y)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None:
                Tc, Xc, Yc = op.solve(cand)
                it += 1
                if sup_norm(Tc - cand) <= c * res:
                    z, Tz, X, Y = cand, Tc, Xc, Yc
                    continue
        z = Tz
        Tz, X, Y = op.solve(z)
        it += 1


def _check_vector(G: GameSpec, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (G.nstates,):
        raise ValueError(f"value vector has shape {f.shape}, game has {G.nstates} states")
    return f


def _check_unit(name: str, v: float, open_left: bool = True) -> None:
    ok = (0.0 < v <= 1.0) if open_left else (0.0 <= v <= 1.0)
    if not ok:
        interval = "(0, 1]" if open_left else "[0, 1]"
        raise ValueError(f"{name}={v} outside {interval}")


def _eye_kernel(G: GameSpec) -> np.ndarray:
    S = G.nstates
    I = np.zeros_like(G.generator)
    I[np.arange(S), :, :, np.arange(S)] = 1.0
    # padding stays zero-rewarded; the val kernel never reads it
    return I


def shapley_operator(G: GameSpec, kernel_scale: float = 1.0) -> StageOperator:
    """T for the game (g, kernel_scale * Q): r = g, K = Id + kernel_scale Q."""
    return StageOperator.of(G, G.payoff, _eye_kernel(G) + kernel_scale * G.generator)


def apply_T(G: GameSpec, f) -> np.ndarray:
    f = _check_vector(G, f)
    return shapley_operator(G)(f)


def apply_T_h(G: GameSpec, h: float, f, check: bool = False) -> np.ndarray:
    """T_h f = (1 - h) f + h T f.

    ``check`` also evaluates val{h g + (Id + h Q) f} directly and raises if
    the two forms differ by more than 1e-12.
    """
    f = _check_vector(G, f)
    _check_unit("h", h, open_left=False)
    out = (1.0 - h) * f + h * apply_T(G, f)
    if check:
        direct = StageOperator.of(G, h * G.payoff, _eye_kernel(G) + h * G.generator)(f)
        gap = sup_norm(out - direct)
        if gap > DEBUG_TOL * max(1.0, sup_norm(f)):
            raise AssertionError(f"T_h forms disagree by {gap:.3e}")
    return out


def value_iterate(G: GameSpec, n: int, h: float = 1.0):
    """V = T_h^n(0) and v = V / (n h); v is None for n = 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_unit("h", h)
    op = StageOperator.of(G, h * G.payoff, _eye_kernel(G) + h * G.generator)
    V = np.zeros(G.nstates)
    for _ in range(n):
        V = op(V)
    return V, (V / (n * h) if n else None)


def discounted_value(G: GameSpec, lam: float, tol: float = 1e-10) -> SolveResult:
    """W_lam, the fixed point of W = T((1 - lam) W); ``normalized`` is w_lam."""
    _check_unit("lambda", lam)
    op = StageOperator.of(G, G.payoff, (1.0 - lam) * (_eye_kernel(G) + G.generator))
    res = fixed_point(op, 1.0 - lam, tol)
    return SolveResult(res.value, res.iterations, res.residual, res.certified_error,
                       res.contraction, lam * res.value)


def normalized_discounted(G: GameSpec, lam: float, tol: float = 1e-10) -> SolveResult:
    """w_lam solved directly from w = val[lam g + (1 - lam) P w]."""
    _check_unit("lambda", lam)
    op = StageOperator.of(G, lam * G.payoff, (1.0 - lam) * (_eye_kernel(G) + G.generator))
    res = fixed_point(op, 1.0 - lam, tol)
    return SolveResult(res.value, res.iterations, res.residual, res.certified_error,
                       res.contraction, res.value)


def duration_mu(lam: float, h: float) -> float:
    return lam / (1.0 + lam - lam * h)


def tilt_mu(lam: float, alpha: float) -> float:
    return lam / (alpha + lam - lam * alpha)


def apply_D(G: GameSpec, lam: float, h: float, z) -> np.ndarray:
    """D^h_lam z = lam T_h((1 - lam h)/lam z), a (1 - lam h)-contraction."""
    _check_unit("lambda", lam)
    _check_unit("h", h)
    z = _check_vector(G, z)
    return lam * apply_T_h(G, h, (1.0 - lam * h) / lam * z)


def duration_operator(G: GameSpec, lam: float, h: float) -> StageOperator:
    """D^h_lam as val[lam h g + (1 - lam h)(Id + h Q) z]."""
    return StageOperator.of(G, lam * h * G.payoff,
                            (1.0 - lam * h) * (_eye_kernel(G) + h * G.generator))


def q_equation_residual(G: GameSpec, coef: float, phi, reward_scale: float = 1.0) -> float:
    """sup |phi - val[reward_scale g + coef Q phi]|."""
    phi = _check_vector(G, phi)
    op = StageOperator.of(G, reward_scale * G.payoff, coef * G.generator)
    return sup_norm(phi - op(phi))


def discounted_value_duration(G: GameSpec, lam: float, h: float, tol: float = 1e-10,
                              check: bool = False) -> SolveResult:
    """w^h_lam, the fixed point of D^h_lam, certified to ``tol``.

    ``check`` verifies the normalized equation val[h lam g + (1 - h lam) P_h w]
    and val[g + (1 - h lam)/lam Q w] = w on the result, each within its
    Lipschitz constant times the certified error.
    """
    _check_unit("lambda", lam)
    _check_unit("h", h)
    op = duration_operator(G, lam, h)
    res = fixed_point(op, 1.0 - lam * h, tol)
    if check:
        w, err = res.value, res.certified_error
        r1 = sup_norm(w - op(w))
        if r1 > 2.0 * err + DEBUG_TOL:
            raise AssertionError(f"normalized equation residual {r1:.3e}")
        coef = (1.0 - h * lam) / lam
        r2 = q_equation_residual(G, coef, w)
        if r2 > (1.0 + 2.0 * coef) * err + DEBUG_TOL * (1.0 + coef):
            raise AssertionError(f"generator-form equation residual {r2:.3e}")
    return SolveResult(res.value, res.iterations, res.residual, res.certified_error,
                       res.contraction, res.value)


def apply_T_tilde(G: GameSpec, alpha: float, f, check: bool = False) -> np.ndarray:
    """(1 - alpha) f + T(alpha f); ``check`` compares with T of (g, alpha Q)."""
    _check_unit("alpha", alpha, open_left=False)
    f = _check_vector(G, f)
    out = (1.0 - alpha) * f + apply_T(G, alpha * f)
    if check:
        direct = shapley_operator(G, alpha)(f)
        gap = sup_norm(out - direct)
        if gap > DEBUG_TOL * max(1.0, sup_norm(f)):
            raise AssertionError(f"tilted operator forms disagree by {gap:.3e}")
    return out


def tilted_operator(G: GameSpec, alpha: float, lam: float) -> StageOperator:
    """z -> lam tilde T_alpha((1 - lam)/lam z) = val[lam g + (1 - lam)(Id + alpha Q) z]."""
    return StageOperator.of(G, lam * G.payoff,
                            (1.0 - lam) * (_eye_kernel(G) + alpha * G.generator))


def discounted_tilde(G: GameSpec, alpha: float, lam: float, tol: float = 1e-10) -> SolveResult:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside (0, 1]; alpha = 0 has no normalized value")
    _check_unit("lambda", lam)
    res = fixed_point(tilted_operator(G, alpha, lam), 1.0 - lam, tol)
    return SolveResult(res.value, res.iterations, res.residual, res.certified_error,
                       res.contraction, res.value)
