"""Numerical certification of the value bounds and identities.

Each registry entry evaluates one inequality (``lhs <= rhs``) or identity
(``lhs = |a - b|`` against ``rhs = 0``) over a parameter grid, with both
sides computed by certified solvers.  A check holds when every grid point
satisfies ``lhs <= rhs + slack``, the slack being the certified numerical
error of the two sides; the report carries the binding grid point.

Inequality checks re-run with 10x tighter solver tolerances while some grid
point has ``|rhs - lhs| < 100 * slack``, so no verdict rests on solver error.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import dataclasses
import io
import itertools
import json
import math
import os
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import ctmc, evolution, shapley
from .game import BoundReport, GameSpec, GameValidationError, scale_kernel, sup_norm
from .partition import Partition

LAMBDAS = tuple(k / 10 for k in range(1, 10))
HS = tuple(k / 10 for k in range(1, 11))
MESHES = (1 / 2, 1 / 4, 1 / 8, 1 / 16)
TIMES = (1.0, 2.0, 5.0)
NS = tuple(range(1, 9))
DISC_HS = (0.4, 0.2, 0.1, 0.05, 0.025)
FLOW_GRID = tuple(sorted({k / 16 for k in range(1, 81)} | set(TIMES)))

DEFAULT_TOL = 1e-10
DEFAULT_FLOW_TOL = 1e-3
TOL_FLOOR = 1e-13
FLOW_TOL_FLOOR = 1e-6
ROUND = 1e-12
RATIO_GROWTH = 1.5


class CheckError(RuntimeError):
    pass


class _Skip(Exception):
    pass


@dataclass
class CheckSpec:
    check_id: str
    game: GameSpec
    parameters: dict[str, Any] = field(default_factory=dict)
    tol: float = DEFAULT_TOL
    flow_tol: float = DEFAULT_FLOW_TOL
    game_name: str = ""

    def tightened(self, factor: float = 10.0) -> "CheckSpec":
        return dataclasses.replace(self, tol=self.tol / factor, flow_tol=self.flow_tol / factor)


@dataclass
class _Part:
    lhs: float
    rhs: float
    err: float
    label: dict[str, Any]

    @property
    def room(self) -> float:
        return self.rhs + self.err - self.lhs


@dataclass
class _Ctx:
    G: GameSpec
    tol: float
    flow_tol: float
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def T0(self) -> float:
        return _T0(self.G)

    @property
    def Cg(self) -> float:
        return self.G.payoff_bound


# ---------------------------------------------------------------- shared pieces

@lru_cache(maxsize=4096)
def _T0(G: GameSpec) -> float:
    return sup_norm(shapley.apply_T(G, np.zeros(G.nstates)))


def _start(G: GameSpec, which: str) -> np.ndarray:
    if which == "zero":
        return np.zeros(G.nstates)
    if which == "random":
        seed = zlib.crc32(G.payoff.tobytes() + G.generator.tobytes())
        return np.random.default_rng(seed).uniform(-1.0, 1.0, G.nstates)
    raise CheckError(f"unknown start vector {which!r}")


@lru_cache(maxsize=1024)
def _flows(G: GameSpec, which: str, tol: float, times: tuple[float, ...] = FLOW_GRID):
    res = evolution.evolve_times(G, _start(G, which), times, tol)
    return {r.t: (r.f, r.certified_error) for r in res}


def _flow(ctx: _Ctx, which: str, t: float):
    table = _flows(ctx.G, which, ctx.flow_tol)
    if t in table:
        return table[t]
    return _flows(ctx.G, which, ctx.flow_tol, (float(t),))[float(t)]


@lru_cache(maxsize=65536)
def _w(G: GameSpec, lam: float, tol: float):
    r = shapley.normalized_discounted(G, lam, tol)
    return r.value, r.certified_error


@lru_cache(maxsize=65536)
def _wh(G: GameSpec, lam: float, h: float, tol: float):
    r = shapley.discounted_value_duration(G, lam, h, tol)
    return r.value, r.certified_error


def _what(G: GameSpec, lam: float, tol: float):
    return _w(G, lam / (1.0 + lam), tol)


def _sequences(h: float) -> dict[str, tuple[float, ...]]:
    rng = np.random.default_rng(int(h * 1e6))
    rand = tuple(float(v) for v in rng.uniform(h / 4, h, size=4))
    return {"uniform": (h,), "alternating": (h, h / 2), "random4": (h,) + rand[1:]}


@lru_cache(maxsize=65536)
def _product(G: GameSpec, lam: float, cycle: tuple[float, ...], tol: float):
    r = evolution.discounted_product(G, lam, itertools.cycle(cycle), tol)
    return r.value, r.certified_error


def clear_caches() -> None:
    for fn in (_T0, _flows, _w, _wh, _product):
        fn.cache_clear()


def _dist(a, b) -> float:
    return sup_norm(np.asarray(a) - np.asarray(b))


def _round(*vals) -> float:
    return ROUND * (1.0 + max((sup_norm(v) for v in vals), default=0.0))


def _rng(p: dict, salt: int) -> np.random.Generator:
    return np.random.default_rng([int(p.get("seed", 0)), salt])


def _require_uniform(G: GameSpec) -> None:
    if not G.uniform_actions:
        raise _Skip("continuous-time checks need identical action sets in every state")


# ---------------------------------------------------------------- flow checks

def _chernoff(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for which in p.get("z", ("zero", "random")):
        z = _start(G, which)
        F = _dist(z, shapley.apply_T(G, z))
        powers = {n: evolution.power_T(G, z, n) for n in p.get("ns", NS)}
        for t in p.get("times", TIMES):
            ft, err = _flow(ctx, which, t)
            for n, Tn in powers.items():
                parts.append(_Part(_dist(ft, Tn), F * math.sqrt(t + (n - t) ** 2),
                                   err + _round(ft, Tn), {"z": which, "t": t, "n": n}))
    return parts


def _vn_rate(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for n in p.get("ns", (1, 2, 3, 4, 5)):
        fn, err = _flow(ctx, "zero", float(n))
        V, v = shapley.value_iterate(G, n)
        parts.append(_Part(_dist(fn / n, v), ctx.T0 / math.sqrt(n), err / n + _round(v), {"n": n}))
    return parts


def _interp(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for which in p.get("z", ("zero", "random")):
        z = _start(G, which)
        F = _dist(z, shapley.apply_T(G, z))
        for h in p.get("meshes", MESHES):
            for n in p.get("ns", NS):
                Thn = evolution.euler_scheme(G, z, [h] * n)
                for t in p.get("times", TIMES):
                    ft, err = _flow(ctx, which, t)
                    parts.append(_Part(_dist(ft, Thn), F * math.sqrt(t * h + (n * h - t) ** 2),
                                       err + _round(ft), {"form": "t vs nh", "z": which, "t": t, "h": h, "n": n}))
                fnh, err = _flow(ctx, which, n * h)
                parts.append(_Part(_dist(fnh, Thn), F * h * math.sqrt(n),
                                   err + _round(fnh), {"form": "t = nh", "z": which, "h": h, "n": n}))
        for t in p.get("times", TIMES):
            ft, err = _flow(ctx, which, t)
            for n in p.get("ns", NS):
                if t / n > 1.0:
                    continue
                Tn = evolution.euler_scheme(G, z, [t / n] * n)
                parts.append(_Part(_dist(ft, Tn), F * t / math.sqrt(n),
                                   err + _round(ft), {"form": "h = t/n", "z": which, "t": t, "n": n}))
    return parts


def _random_steps(rng, mesh: float, count: int) -> tuple[float, ...]:
    return tuple(float(v) for v in rng.uniform(0.05, 1.0, size=count) * mesh)


def _euler_pair(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 11)
    S = G.nstates
    for trial in range(int(p.get("trials", 30))):
        z = rng.uniform(-1, 1, S)
        if trial % 2:
            z0, zh0 = z + rng.uniform(-0.3, 0.3, S), z + rng.uniform(-0.3, 0.3, S)
        else:
            z0 = zh0 = z
        H = Partition(_random_steps(rng, rng.choice(MESHES + (1.0,)), int(rng.integers(1, 17))))
        Hh = Partition(_random_steps(rng, rng.choice(MESHES + (1.0,)), int(rng.integers(1, 17))))
        zk = evolution.euler_scheme(G, z0, H)
        zl = evolution.euler_scheme(G, zh0, Hh)
        F = _dist(z, shapley.apply_T(G, z))
        sk, tk = H.sigma[-1], H.tau[-1]
        sl, tl = Hh.sigma[-1], Hh.tau[-1]
        rhs = _dist(zh0, z) + _dist(z0, z) + F * math.sqrt((sk - sl) ** 2 + tk + tl)
        parts.append(_Part(_dist(zl, zk), rhs, _round(zk, zl), {"trial": trial, "k": len(H), "l": len(Hh)}))
    return parts


def _euler_ode(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 12)
    for which in p.get("z", ("zero", "random")):
        z = _start(G, which)
        F = _dist(z, shapley.apply_T(G, z))
        for t in p.get("times", TIMES):
            ft, err = _flow(ctx, which, t)
            for mesh in p.get("meshes", MESHES):
                for trial in range(int(p.get("trials", 2))):
                    total = t if trial == 0 else t * rng.uniform(0.5, 1.5)
                    H = Partition.random(rng, total, mesh)
                    zk = evolution.euler_scheme(G, z, H)
                    rhs = F * math.sqrt((H.sigma[-1] - t) ** 2 + H.tau[-1])
                    parts.append(_Part(_dist(ft, zk), rhs, err + _round(ft, zk),
                                       {"z": which, "t": t, "mesh": mesh, "sigma": float(H.sigma[-1])}))
    return parts


def _composite(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 13)
    for M in p.get("times", TIMES):
        fM, err = _flow(ctx, "zero", M)
        for mesh in tuple(p.get("meshes", MESHES)) + (1.0,):
            for trial in range(int(p.get("trials", 2))):
                H = Partition.random(rng, M, mesh)
                U, _ = evolution.partition_value(G, H)
                if mesh < 1.0:
                    rhs, form = ctx.T0 * math.sqrt(H.mesh * M), "mesh"
                else:
                    rhs, form = ctx.T0 * math.sqrt(M), "unit"
                parts.append(_Part(_dist(fM, U), rhs, err + _round(fM, U),
                                   {"form": form, "M": M, "mesh": mesh, "trial": trial}))
    return parts


def _fin_exact(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for h in p.get("meshes", MESHES):
        for n in p.get("ns", NS):
            V, _ = shapley.value_iterate(G, n, h)
            f, err = _flow(ctx, "zero", n * h)
            parts.append(_Part(_dist(V, f), ctx.T0 * h * math.sqrt(n), err + _round(V, f),
                               {"n": n, "h": h}))
    return parts


def _partition_limit(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 14)
    for t in p.get("times", TIMES):
        ft, err = _flow(ctx, "zero", t)
        for mesh in p.get("meshes", MESHES):
            for trial in range(int(p.get("trials", 2))):
                H = Partition.random(rng, t, mesh)
                U, _ = evolution.partition_value(G, H)
                parts.append(_Part(_dist(U, ft), ctx.T0 * math.sqrt(H.mesh * t), err + _round(U, ft),
                                   {"t": t, "mesh": mesh, "trial": trial}))
    return parts


def _normalized_asymptotic(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 15)
    for t in p.get("times", TIMES):
        ft, err = _flow(ctx, "zero", t)
        for trial in range(int(p.get("trials", 4))):
            H = Partition.random(rng, t, 1.0)
            _, u = evolution.partition_value(G, H)
            parts.append(_Part(_dist(u, ft / t), ctx.T0 / math.sqrt(t), (err + _round(ft)) / t,
                               {"t": t, "trial": trial, "k": len(H)}))
    return parts


# ---------------------------------------------------------------- discounted checks

def _w_bounds(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    lams = p.get("lambdas", LAMBDAS)
    for lam in lams:
        w, e = _w(G, lam, ctx.tol)
        parts.append(_Part(sup_norm(w), ctx.T0, e + _round(w), {"part": "norm", "lambda": lam}))
    for lam, mu in itertools.permutations(lams, 2):
        (a, ea), (b, eb) = _w(G, lam, ctx.tol), _w(G, mu, ctx.tol)
        parts.append(_Part(_dist(a, b), 2 * abs(1 - lam / mu) * ctx.T0, ea + eb + _round(a, b),
                           {"part": "lipschitz", "lambda": lam, "mu": mu}))
    return parts


def _mu_identity(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for lam in p.get("lambdas", LAMBDAS):
        for h in p.get("hs", HS):
            a, ea = _wh(G, lam, h, ctx.tol)
            b, eb = _w(G, shapley.duration_mu(lam, h), ctx.tol)
            parts.append(_Part(_dist(a, b), 0.0, ea + eb + _round(a, b), {"lambda": lam, "h": h}))
    return parts


def _vanish_h(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for lam in p.get("lambdas", LAMBDAS):
        b, eb = _what(G, lam, ctx.tol)
        for h in p.get("hs", HS):
            a, ea = _wh(G, lam, h, ctx.tol)
            parts.append(_Part(_dist(a, b), 2 * ctx.T0 * lam * h, ea + eb + _round(a, b),
                               {"lambda": lam, "h": h}))
    return parts


def _product_finite(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    rng = _rng(p, 16)
    for lam in p.get("lambdas", LAMBDAS):
        b, eb = _what(G, lam, ctx.tol)
        for trial in range(int(p.get("trials", 4))):
            mesh = float(rng.choice((1.0, 0.5, 0.25)))
            steps = _random_steps(rng, mesh, int(rng.integers(1, 40)))
            z = rng.uniform(-2, 2, G.nstates) if trial % 2 else np.zeros(G.nstates)
            a = evolution.finite_product(G, lam, steps, z)
            contraction = float(np.prod([1 - lam * h for h in steps]))
            rhs = 2 * ctx.T0 * max(steps) + (ctx.T0 + sup_norm(z)) * contraction
            parts.append(_Part(_dist(a, b), rhs, eb + _round(a, b),
                               {"lambda": lam, "trial": trial, "n": len(steps)}))
    return parts


def _product_limit(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for lam in p.get("lambdas", LAMBDAS):
        b, eb = _what(G, lam, ctx.tol)
        for h in p.get("hs", HS):
            for name, cyc in _sequences(h).items():
                a, ea = _product(G, lam, cyc, ctx.tol)
                parts.append(_Part(_dist(a, b), 2 * ctx.T0 * h, ea + eb + _round(a, b),
                                   {"lambda": lam, "h": h, "steps": name}))
    return parts


def _asymptotic_h(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for lam in p.get("lambdas", LAMBDAS):
        b, eb = _w(G, lam, ctx.tol)
        for h in p.get("hs", HS):
            a, ea = _wh(G, lam, h, ctx.tol)
            parts.append(_Part(_dist(a, b), 2 * ctx.T0 * lam, ea + eb + _round(a, b),
                               {"lambda": lam, "h": h}))
    return parts


def _asymptotic_h_varying(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    Cp = 2 * (ctx.Cg + ctx.T0)
    ctx.extra["C_prime"] = Cp
    lams = p.get("lambdas", LAMBDAS)
    for lam in lams:
        b, eb = _w(G, lam, ctx.tol)
        for h in p.get("hs", HS):
            for name, cyc in _sequences(h).items():
                a, ea = _product(G, lam, cyc, ctx.tol)
                parts.append(_Part(_dist(a, b), Cp * lam, ea + eb + _round(a, b),
                                   {"lambda": lam, "h": h, "steps": name}))
    # assumption (H) with k(d) = d and l(s) = C_g + s
    rng = _rng(p, 17)
    for lam, mu in itertools.combinations(lams, 2):
        z = rng.uniform(-3, 3, G.nstates)
        a = shapley.apply_D(G, lam, 1.0, z)
        b = shapley.apply_D(G, mu, 1.0, z)
        parts.append(_Part(_dist(a, b), abs(lam - mu) * (ctx.Cg + sup_norm(z)), _round(a, b),
                           {"part": "assumption-H", "lambda": lam, "mu": mu}))
    return parts


def _tilt_identity(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for alpha in p.get("alphas", (0.25, 0.5, 0.75, 1.0)):
        for lam in p.get("lambdas", LAMBDAS):
            r = shapley.discounted_tilde(G, alpha, lam, ctx.tol)
            b, eb = _w(G, shapley.tilt_mu(lam, alpha), ctx.tol)
            parts.append(_Part(_dist(r.value, b), 0.0, r.certified_error + eb + _round(b),
                               {"alpha": alpha, "lambda": lam}))
    return parts


def _tilt_invariance(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    b, eb = _w(G, 0.5, ctx.tol)
    for lam in p.get("lambdas", (0.1, 0.2, 0.3, 0.4, 0.5)):
        r = shapley.discounted_tilde(G, lam / (1 - lam), lam, ctx.tol)
        parts.append(_Part(_dist(r.value, b), 0.0, r.certified_error + eb + _round(b), {"lambda": lam}))
    return parts


def _hatw_equation(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    for lam in p.get("lambdas", LAMBDAS):
        lip = 1 + 2 / lam
        phi, _ = _what(G, lam, ctx.tol / lip)
        res = shapley.q_equation_residual(G, 1 / lam, phi)
        parts.append(_Part(res, 10 * ctx.tol, lip * _round(phi), {"lambda": lam}))
    return parts


def _hatw_rate(ctx: _Ctx, p) -> list[_Part]:
    return _vanish_h(ctx, p)


def _kernel_invariance(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    skipped = 0
    for lam in p.get("lambdas", LAMBDAS):
        if lam >= 1.0:
            continue
        for h in p.get("hs", HS):
            a, ea = _wh(G, lam, h, ctx.tol)
            b, eb = _w(G, shapley.duration_mu(lam, h), ctx.tol)
            parts.append(_Part(_dist(a, b), 0.0, ea + eb + _round(a, b),
                               {"lambda": lam, "h": h, "pair": "duration-discount"}))
            try:
                G2 = scale_kernel(G, (1 - lam * h) / (1 - lam))
            except GameValidationError:
                skipped += 1
                continue
            c, ec = _w(G2, lam, ctx.tol)
            parts.append(_Part(_dist(a, c), 0.0, ea + ec + _round(a, c),
                               {"lambda": lam, "h": h, "pair": "duration-kernel"}))
    ctx.extra["skipped_kernel_rescales"] = skipped
    return parts


def _scaled_kernel_fixed(ctx: _Ctx, p) -> list[_Part]:
    G, parts = ctx.G, []
    sols = {}
    for lam in p.get("lambdas", (0.1, 0.2, 0.3, 0.4, 0.5)):
        G2 = scale_kernel(G, lam / (1 - lam))
        sols[lam] = _w(G2, lam, ctx.tol)
    ref_lam = max(sols)
    ref, eref = sols[ref_lam]
    for lam, (phi, e) in sols.items():
        if lam != ref_lam:
            parts.append(_Part(_dist(phi, ref), 0.0, e + eref + _round(phi, ref),
                               {"part": "independence", "lambda": lam}))
        res = shapley.q_equation_residual(G, 1.0, phi)
        parts.append(_Part(res, 0.0, 3 * e + 3 * _round(phi), {"part": "equation", "lambda": lam}))
    return parts


# ---------------------------------------------------------------- continuous-time checks

def _growth_parts(values: Sequence[float], slacks: Sequence[float], labels) -> list[_Part]:
    parts = []
    running = values[0]
    for k in range(1, len(values)):
        parts.append(_Part(values[k], RATIO_GROWTH * running, slacks[k] + slacks[k - 1], labels[k]))
        running = max(running, values[k])
    return parts


def _disc_gap(ctx: _Ctx, p) -> list[_Part]:
    G = ctx.G
    _require_uniform(G)
    rng = _rng(p, 18)
    samples = {"zero": np.zeros(G.nstates), "random": rng.uniform(-1, 1, G.nstates),
               "large": rng.uniform(-5, 5, G.nstates)}
    parts, c0 = [], 0.0
    hs = p.get("hs", DISC_HS)
    for name, f in samples.items():
        ratios, slacks = [], []
        for h in hs:
            gap = _dist(shapley.apply_T_h(G, h, f), ctx_barT(G, h, f))
            scale = (1 + sup_norm(f)) * h * h
            ratios.append(gap / scale)
            slacks.append((ctmc.QUAD_TOL * 10 + _round(f)) / scale)
        c0 = max(c0, max(ratios))
        parts += _growth_parts(ratios, slacks, [{"f": name, "h": h} for h in hs])
    ctx.extra["C0_empirical"] = c0
    return parts


def ctx_barT(G: GameSpec, h: float, f) -> np.ndarray:
    return ctmc.apply_barT_h(G, h, f)


def _disc_finite(ctx: _Ctx, p) -> list[_Part]:
    G = ctx.G
    _require_uniform(G)
    t = float(p.get("t", 2.0))
    hs = p.get("hs", DISC_HS)
    ft, err = _flow(ctx, "zero", t)
    ratios, slacks = [], []
    for h in hs:
        n = max(1, round(t / h))
        Vbar = ctmc.discretized_finite_value(G, Partition.uniform(t, n))
        scale = math.sqrt(h * t) + h * t + h * t * t
        ratios.append(_dist(Vbar, ft) / scale)
        slacks.append((err + n * 10 * ctmc.QUAD_TOL + _round(Vbar, ft)) / scale)
    ctx.extra["C_empirical"] = max(ratios)
    return _growth_parts(ratios, slacks, [{"t": t, "h": h} for h in hs])


def _disc_finite_slow(ctx: _Ctx, p) -> list[_Part]:
    G = ctx.G
    _require_uniform(G)
    hs = p.get("hs", DISC_HS[:4])
    ratios, slacks = [], []
    for h in hs:
        n = math.ceil(h ** -1.5)
        t = n * h
        vbar = ctmc.discretized_finite_value(G, Partition((h,) * n)) / t
        ft, err = _flow(ctx, "zero", t)
        ratios.append(_dist(vbar, ft / t) / math.sqrt(h))
        slacks.append((err / t + n * 10 * ctmc.QUAD_TOL + _round(vbar)) / math.sqrt(h))
    ctx.extra["O_sqrt_h_constant"] = max(ratios)
    return _growth_parts(ratios, slacks, [{"h": h, "n": math.ceil(h ** -1.5)} for h in hs])


def _disc_discounted(ctx: _Ctx, p) -> list[_Part]:
    G = ctx.G
    _require_uniform(G)
    hs = p.get("hs", DISC_HS[:4])
    parts = []
    for lam in p.get("lambdas", (0.1, 0.5, 0.9)):
        b, eb = _what(G, lam, ctx.tol)
        gaps, slacks = [], []
        for h in hs:
            r = ctmc.discretized_discounted_value(G, lam, h, ctx.tol)
            gaps.append(_dist(r.value, b))
            slacks.append(r.certified_error + eb + 10 * ctmc.QUAD_TOL + _round(b))
        for k in range(1, len(hs)):
            parts.append(_Part(gaps[k], 2 * gaps[k - 1], slacks[k] + 2 * slacks[k - 1],
                               {"part": "decrease", "lambda": lam, "h": hs[k]}))
        parts.append(_Part(gaps[-1], 0.02 * ctx.Cg, slacks[-1],
                           {"part": "final", "lambda": lam, "h": hs[-1]}))
    return parts


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class _Entry:
    fn: Callable[[_Ctx, dict], list[_Part]]
    identity: bool
    statement: str
    refine: bool = True  # False when the slack is not solver error


REGISTRY: dict[str, _Entry] = {
    "CHERNOFF": _Entry(_chernoff, False, "|f_t(z) - T^n z| <= |z - Tz| sqrt(t + (n - t)^2)"),
    "VN-RATE": _Entry(_vn_rate, False, "|f_n(0)/n - v_n| <= |T(0)| / sqrt(n)"),
    "INTERP": _Entry(_interp, False, "interpolated Chernoff bounds for T_h^n"),
    "EULER-PAIR": _Entry(_euler_pair, False, "distance between two Euler schemes"),
    "EULER-ODE": _Entry(_euler_ode, False, "|f_t(z) - z_k| <= |z - Tz| sqrt((sigma_k - t)^2 + tau_k)"),
    "COMPOSITE": _Entry(_composite, False, "|f_M(0) - prod T_{h_i}(0)| <= |T(0)| sqrt(h M)"),
    "W-BOUNDS": _Entry(_w_bounds, False, "|w_lam| <= |T(0)|, |w_lam - w_mu| <= 2|1 - lam/mu| |T(0)|"),
    "MU-IDENTITY": _Entry(_mu_identity, True, "w^h_lam = w_mu, mu = lam/(1 + lam - lam h)"),
    "VANISH-H": _Entry(_vanish_h, False, "|w^h_lam - w_{lam/(1+lam)}| <= 2|T(0)| lam h"),
    "PRODUCT-FINITE": _Entry(_product_finite, False, "finite products of D^{h_i}_lam"),
    "PRODUCT-LIMIT": _Entry(_product_limit, False, "|W^H_lam - hat w_lam| <= 2|T(0)| h"),
    "ASYMPTOTIC-H": _Entry(_asymptotic_h, False, "|w^h_lam - w_lam| <= 2|T(0)| lam"),
    "ASYMPTOTIC-H-VARYING": _Entry(_asymptotic_h_varying, False,
                                   "|W^H_lam - w_lam| <= 2(C_g + |T(0)|) lam"),
    "TILT-IDENTITY": _Entry(_tilt_identity, True, "tilde w^alpha_lam = w_mu, mu = lam/(alpha + lam - lam alpha)"),
    "TILT-INVARIANCE": _Entry(_tilt_invariance, True, "tilde w^{lam/(1-lam)}_lam = w_{1/2}"),
    "FIN-EXACT": _Entry(_fin_exact, False, "|V^h_n - f_{nh}(0)| <= |T(0)| h sqrt(n)"),
    "PARTITION-LIMIT": _Entry(_partition_limit, False, "|U(H_t) - f_t(0)| <= |T(0)| sqrt(h t)"),
    "NORMALIZED-ASYMPTOTIC": _Entry(_normalized_asymptotic, False,
                                    "|u(H_t) - f_t(0)/t| <= |T(0)| / sqrt(t)"),
    "HATW-EQUATION": _Entry(_hatw_equation, False, "hat w_lam solves phi = val[g + Q/lam phi]",
                            refine=False),
    "HATW-RATE": _Entry(_hatw_rate, False, "|w^h_lam - hat w_lam| <= 2|T(0)| lam h"),
    "KERNEL-INVARIANCE": _Entry(_kernel_invariance, True,
                                "Val(lam, h, R) = Val(mu, 1, R) = Val(lam, 1, (1 - lam h)/(1 - lam) R)"),
    "SCALED-KERNEL-FIXED": _Entry(_scaled_kernel_fixed, True,
                                  "lam-discounted value of (g, lam/(1-lam) R) solves phi = val[g + R phi]"),
    "DISC-GAP": _Entry(_disc_gap, False, "|T_h f - bar T_h f| / ((1 + |f|) h^2) stays bounded",
                       refine=False),
    "DISC-FINITE": _Entry(_disc_finite, False,
                          "|bar V_H(t) - hat V_t| / (sqrt(ht) + ht + ht^2) stays bounded"),
    "DISC-FINITE-SLOW": _Entry(_disc_finite_slow, False,
                               "|bar v^h_{n(h)} - hat v_{t(h)}| / sqrt(h) stays bounded"),
    "DISC-DISCOUNTED": _Entry(_disc_discounted, False, "|bar w^h_lam - hat w_lam| shrinks with h"),
}

CHECK_IDS = tuple(sorted(REGISTRY))


def _evaluate(spec: CheckSpec, entry: _Entry):
    ctx = _Ctx(spec.game, spec.tol, spec.flow_tol)
    refinements = 0
    while True:
        parts = entry.fn(ctx, spec.parameters)
        if entry.identity or not entry.refine or not parts:
            return ctx, parts, refinements
        closest = min(abs(q.rhs - q.lhs) / q.err if q.err > 0 else math.inf for q in parts)
        if closest >= 100 or (ctx.tol <= TOL_FLOOR and ctx.flow_tol <= FLOW_TOL_FLOOR) \
                or refinements >= 2:
            return ctx, parts, refinements
        ctx = _Ctx(spec.game, max(ctx.tol / 10, TOL_FLOOR),
                   max(ctx.flow_tol / 10, FLOW_TOL_FLOOR))
        refinements += 1


def run_check(spec: CheckSpec) -> BoundReport:
    """Evaluate one registry check on one game."""
    if spec.check_id not in REGISTRY:
        raise CheckError(f"unknown check {spec.check_id!r}")
    entry = REGISTRY[spec.check_id]
    report = BoundReport(spec.check_id, dict(spec.parameters), math.nan, math.nan,
                         game=spec.game_name)
    try:
        ctx, parts, refinements = _evaluate(spec, entry)
    except _Skip as exc:
        report.status, report.holds, report.error = "SKIPPED", True, str(exc)
        return report
    except Exception as exc:
        raise CheckError(f"{spec.check_id}: {type(exc).__name__}: {exc}") from exc
    if not parts:
        report.status, report.holds = "SKIPPED", True
        report.error = "no applicable grid points"
        return report
    worst = min(parts, key=lambda q: q.room)
    report.lhs, report.rhs, report.slack = worst.lhs, worst.rhs, worst.err
    report.holds = all(q.lhs <= q.rhs + q.err for q in parts)
    report.parameters["binding"] = worst.label
    closest = min((abs(q.rhs - q.lhs) / q.err if q.err > 0 else math.inf for q in parts))
    report.constants = {
        "T0_norm": ctx.T0,
        "C_g": ctx.Cg,
        "tol": ctx.tol,
        "flow_tol": ctx.flow_tol,
        "refinements": refinements,
        "grid_points": len(parts),
        "violations": sum(q.lhs > q.rhs + q.err for q in parts),
        "max_abs_lhs_minus_rhs": max(q.lhs - q.rhs for q in parts),
        "min_margin_over_slack": closest,
        "statement": entry.statement,
        **ctx.extra,
    }
    return report


def _run_recorded(spec: CheckSpec) -> BoundReport:
    try:
        return run_check(spec)
    except CheckError as exc:
        return BoundReport(spec.check_id, dict(spec.parameters), math.nan, math.nan,
                           holds=False, status="ERROR", game=spec.game_name, error=str(exc))


def _threads() -> int:
    try:
        return max(0, int(os.environ.get("STAGEGAME_THREADS", "0")))
    except ValueError:
        return 0


def run_suite(games: Sequence[GameSpec], grid: Sequence[dict] | None = None,
              out=None, checks: Iterable[str] | None = None,
              names: Sequence[str] | None = None, tol: float = DEFAULT_TOL,
              flow_tol: float = DEFAULT_FLOW_TOL) -> list[BoundReport]:
    """Run registry checks over ``games`` x ``grid``.

    ``grid`` is a list of parameter overrides, one suite pass per entry
    (``[{}]`` runs the default grids).  Reports come back ordered by
    (check_id, game index, grid index) and are also written to ``out`` as
    JSON lines when given.
    """
    if grid is None:
        grid = [{}]
    ids = sorted(checks) if checks is not None else list(CHECK_IDS)
    names = list(names) if names is not None else [f"game{k}" for k in range(len(games))]
    specs = [CheckSpec(cid, G, dict(params), tol, flow_tol, names[gi])
             for cid in ids for gi, G in enumerate(games) for params in grid]
    workers = _threads()
    if workers > 0 and len(specs) > 1:
        with cf.ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_recorded, specs))
    else:
        reports = [_run_recorded(s) for s in specs]
    if out is not None:
        write_jsonl(reports, out)
    return reports


# ---------------------------------------------------------------- sinks

def _open(out):
    if isinstance(out, (str, os.PathLike)):
        return open(out, "w", newline=""), True
    return out, False


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    if isinstance(v, np.ndarray):
        return [_jsonable(float(x)) for x in v.ravel()]
    return v


def report_json(report: BoundReport) -> str:
    return json.dumps(_jsonable(report.to_json()), sort_keys=True)


def write_jsonl(reports: Iterable[BoundReport], out) -> None:
    fh, close = _open(out)
    try:
        for r in reports:
            fh.write(report_json(r) + "\n")
    finally:
        if close:
            fh.close()


CSV_FIELDS = ("check_id", "game", "params", "lhs", "rhs", "margin", "holds")


def write_csv(reports: Iterable[BoundReport], out) -> None:
    fh, close = _open(out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in reports:
            w.writerow([r.check_id, r.game, json.dumps(_jsonable(r.parameters), sort_keys=True),
                        repr(r.lhs), repr(r.rhs), repr(r.margin), r.holds])
    finally:
        if close:
            fh.close()


def csv_text(reports: Iterable[BoundReport]) -> str:
    buf = io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()
