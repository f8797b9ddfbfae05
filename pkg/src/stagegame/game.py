"""Finite stochastic games G = (g, Q) and the small result records shared by
the solvers.

Payoffs are per unit of time and the generator Q gives the one-stage
transition P = Id + Q.  Action sets may differ across states; tensors are
stored zero-padded to the largest action counts, with ``actions1`` and
``actions2`` giving the live block of each state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


class GameValidationError(ValueError):
    pass


def sup_norm(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GameSpec:
    states: tuple[str, ...]
    actions1: tuple[int, ...]
    actions2: tuple[int, ...]
    payoff: np.ndarray  # (S, M, N), zero outside each state's block
    generator: np.ndarray  # (S, M, N, S)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "actions1", tuple(int(a) for a in self.actions1))
        object.__setattr__(self, "actions2", tuple(int(a) for a in self.actions2))
        object.__setattr__(self, "payoff", _readonly(self.payoff))
        object.__setattr__(self, "generator", _readonly(self.generator))
        _validate(self)

    @property
    def nstates(self) -> int:
        return len(self.states)

    @property
    def payoff_bound(self) -> float:
        """C_g = sup |g|."""
        return sup_norm(self.payoff)

    @property
    def uniform_actions(self) -> bool:
        return len(set(self.actions1)) == 1 and len(set(self.actions2)) == 1

    def block(self, w: int) -> tuple[np.ndarray, np.ndarray]:
        m, n = self.actions1[w], self.actions2[w]
        return self.payoff[w, :m, :n], self.generator[w, :m, :n, :]

    def max_exit_rate(self) -> float:
        S = self.nstates
        diag = self.generator[np.arange(S), :, :, np.arange(S)]
        return float(-diag.min()) if diag.size else 0.0

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return (self.states == other.states and self.actions1 == other.actions1
                and self.actions2 == other.actions2
                and np.array_equal(self.payoff, other.payoff)
                and np.array_equal(self.generator, other.generator))

    def __hash__(self):
        return hash((self.states, self.actions1, self.actions2,
                     self.payoff.tobytes(), self.generator.tobytes()))

    def to_json(self) -> dict[str, Any]:
        pay, gen = [], []
        for w in range(self.nstates):
            g, q = self.block(w)
            pay.append(g.tolist())
            gen.append(q.tolist())
        return {
            "states": list(self.states),
            "actions": [[a, b] for a, b in zip(self.actions1, self.actions2)],
            "payoff": pay,
            "generator": gen,
        }


def _validate(G: GameSpec) -> None:
    S = len(G.states)
    if S == 0:
        raise GameValidationError("game needs at least one state")
    if len(set(G.states)) != S:
        raise GameValidationError("state identifiers must be distinct")
    if len(G.actions1) != S or len(G.actions2) != S:
        raise GameValidationError("need one (actions1, actions2) pair per state")
    if min(G.actions1) < 1 or min(G.actions2) < 1:
        raise GameValidationError("every state needs at least one action per player")
    M, N = max(G.actions1), max(G.actions2)
    if G.payoff.shape != (S, M, N):
        raise GameValidationError(f"payoff shape {G.payoff.shape}, expected {(S, M, N)}")
    if G.generator.shape != (S, M, N, S):
        raise GameValidationError(
            f"generator shape {G.generator.shape}, expected {(S, M, N, S)}")
    if not np.all(np.isfinite(G.payoff)):
        raise GameValidationError("payoff has non-finite entries")
    if not np.all(np.isfinite(G.generator)):
        raise GameValidationError("generator has non-finite entries")
    for w in range(S):
        _, q = G.block(w)
        m, n = q.shape[:2]
        for i in range(m):
            for j in range(n):
                row = q[i, j]
                where = f"(state={G.states[w]!r}, i={i}, j={j})"
                total = math.fsum(row)
                if abs(total) > ROW_SUM_TOL:
                    raise GameValidationError(
                        f"generator row {where} sums to {total!r}, not 0")
                off = np.delete(row, w)
                if off.size and off.min() < 0:
                    raise GameValidationError(
                        f"generator row {where} has a negative off-diagonal rate")
                if row[w] > 0:
                    raise GameValidationError(f"generator row {where} has a positive diagonal")
                if row[w] < -1:
                    raise GameValidationError(
                        f"generator row {where} has exit rate {-row[w]!r} > 1; "
                        f"rescale Q (and time) by {1 / -row[w]:.6g} so Id + Q is stochastic")


def make_game(states: Sequence[str], payoff_blocks, generator_blocks) -> GameSpec:
    """Build a GameSpec from per-state (possibly ragged) blocks."""
    S = len(states)
    if len(payoff_blocks) != S or len(generator_blocks) != S:
        raise GameValidationError("need one payoff and one generator block per state")
    pays = [np.atleast_2d(np.asarray(b, dtype=float)) for b in payoff_blocks]
    gens = [np.asarray(b, dtype=float) for b in generator_blocks]
    for w, (g, q) in enumerate(zip(pays, gens)):
        if g.ndim != 2:
            raise GameValidationError(f"payoff block of state {w} is not a matrix")
        if q.shape != g.shape + (S,):
            raise GameValidationError(
                f"generator block of state {w} has shape {q.shape}, expected {g.shape + (S,)}")
    a1 = [g.shape[0] for g in pays]
    a2 = [g.shape[1] for g in pays]
    M, N = max(a1), max(a2)
    payoff = np.zeros((S, M, N))
    generator = np.zeros((S, M, N, S))
    for w, (g, q) in enumerate(zip(pays, gens)):
        payoff[w, :a1[w], :a2[w]] = g
        generator[w, :a1[w], :a2[w], :] = q
    return GameSpec(tuple(states), tuple(a1), tuple(a2), payoff, generator)


def game_from_json(doc: dict) -> GameSpec:
    try:
        states = doc["states"]
        actions = doc["actions"]
        pay = doc["payoff"]
        gen = doc["generator"]
    except (KeyError, TypeError) as exc:
        raise GameValidationError(f"game document missing field {exc}") from None
    if len(actions) != len(states):
        raise GameValidationError("'actions' needs one entry per state")
    G = make_game(states, pay, gen)
    declared = [tuple(int(v) for v in a) for a in actions]
    found = list(zip(G.actions1, G.actions2))
    for w, (d, f) in enumerate(zip(declared, found)):
        if d != f:
            raise GameValidationError(
                f"state {states[w]!r} declares actions {d} but its payoff block is {f}")
    return G


def load_game(path) -> GameSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameValidationError(f"{path}: not valid JSON ({exc})") from None
    return game_from_json(doc)


def save_game(G: GameSpec, path) -> None:
    Path(path).write_text(json.dumps(G.to_json(), indent=1) + "\n")


# Closed-form fixtures.  With P = Id + Q, the quantities used as oracles:
#
#   FIX-CONST  T f = 1 + f, so V_n = n, W_lam = 1/lam, w_lam = 1, f_t(0) = t.
#   FIX-MP     val [[1,-1],[-1,1]] = 0 and the state never moves: T f = f,
#              every value is 0.
#   FIX-ABS    a pays 1 and jumps to the absorbing 0-payoff state b at rate 1.
#              P(a) = (0, 1), so V_n(a) = 1 for n >= 1 and
#              W_lam(a) = 1 + (1-lam) W_lam(b) = 1, i.e. w_lam(a) = lam.
#              Exact games give w^h_lam(a) = mu = lam / (1 + lam - lam h) and
#              hat w_lam(a) = lam / (1 + lam).  The flow solves
#              f'(a) = 1 - f(a), f(b) = 0: f_t(a) = 1 - exp(-t).
#              In continuous time g^h(a) = 1 - exp(-h), and the discretized
#              discounted value solves
#              w = lam/(1+lam) (1 - e^{-(1+lam)h}) + e^{-(1+lam)h} w,
#              i.e. w(a) = lam / (1 + lam) for every h.
FIXTURES = ("FIX-CONST", "FIX-MP", "FIX-ABS")


def fixture(name: str) -> GameSpec:
    if name == "FIX-CONST":
        return make_game(["a"], [[[1.0]]], [[[[0.0]]]])
    if name == "FIX-MP":
        return make_game(["a"], [[[1.0, -1.0], [-1.0, 1.0]]], [np.zeros((2, 2, 1))])
    if name == "FIX-ABS":
        return make_game(["a", "b"], [[[1.0]], [[0.0]]],
                         [[[[-1.0, 1.0]]], [[[0.0, 0.0]]]])
    raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")


def random_game(seed: int, nstates: int = 2, nactions: int = 2,
                ragged: bool = False) -> GameSpec:
    """Random game with payoffs U[-1, 1] and rows r (p - e_w), r ~ U[0, 1].

    With ``ragged`` each state draws its own action counts in 1..nactions.
    """
    if not 1 <= nstates <= 6 or not 1 <= nactions <= 4:
        raise ValueError("random_game supports 1..6 states and 1..4 actions")
    rng = np.random.default_rng(seed)
    pays, gens = [], []
    for w in range(nstates):
        if ragged:
            m, n = (int(k) for k in rng.integers(1, nactions + 1, size=2))
        else:
            m = n = nactions
        pays.append(rng.uniform(-1.0, 1.0, size=(m, n)))
        rate = rng.uniform(0.0, 1.0, size=(m, n, 1))
        p = rng.dirichlet(np.ones(nstates), size=(m, n))
        q = rate * p
        q[:, :, w] = 0.0
        q[:, :, w] = -q.sum(axis=2)
        gens.append(q)
    return make_game([f"s{w}" for w in range(nstates)], pays, gens)


def exact_game_params(G: GameSpec, h: float) -> GameSpec:
    """G^h = (h g, h Q), the game with stage duration h."""
    if not 0.0 < h <= 1.0:
        raise ValueError(f"stage duration h={h} outside (0, 1]")
    if h == 1.0:
        return G
    return GameSpec(G.states, G.actions1, G.actions2, h * G.payoff, h * G.generator)


def scale_kernel(G: GameSpec, factor: float) -> GameSpec:
    """(g, factor * Q); raises GameValidationError if rates leave [0, 1]."""
    return GameSpec(G.states, G.actions1, G.actions2, G.payoff, factor * G.generator)


@dataclass(frozen=True)
class SolveResult:
    value: np.ndarray
    iterations: int
    residual: float
    certified_error: float
    contraction: float = 0.0
    normalized: np.ndarray | None = None


@dataclass
class BoundReport:
    check_id: str
    parameters: dict[str, Any]
    lhs: float
    rhs: float
    slack: float = 0.0
    holds: bool = False
    constants: dict[str, Any] = field(default_factory=dict)
    status: str = "OK"  # OK | SKIPPED | ERROR
    game: str = ""
    error: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_json(self) -> dict[str, Any]:
        return {
            "check_id": self.check_id,
            "game": self.game,
            "parameters": self.parameters,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "slack": self.slack,
            "holds": self.holds,
            "status": self.status,
            "constants": self.constants,
            "error": self.error,
        }


def random_suite(count: int = 100) -> list[GameSpec]:
    """Seeds 0..count-1 with 1-4 states and 1-3 actions; every tenth game is ragged."""
    return [random_game(seed, 1 + seed % 4, 1 + (seed // 4) % 3, ragged=seed % 10 == 9)
            for seed in range(count)]
