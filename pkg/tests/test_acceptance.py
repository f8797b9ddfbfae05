"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from stagegame import bounds, ctmc, evolution, shapley
from stagegame.bounds import run_suite
from stagegame.game import FIXTURES, fixture, random_suite
from stagegame.matgame import best_pure_check, game_value, solve_matrix_game
from stagegame.partition import Partition

GAMES = random_suite(100)
NAMES = [f"random{k}" for k in range(100)]
ALL_GAMES = [fixture(f) for f in FIXTURES] + GAMES
ALL_NAMES = list(FIXTURES) + NAMES


def announce(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")


def failures(reports, ids):
    return [r for r in reports if r.check_id in ids and not r.holds]


def describe(bad):
    return "; ".join(f"{r.check_id}/{r.game} lhs={r.lhs:.4g} rhs={r.rhs:.4g} at {r.parameters.get('binding')}"
                     for r in bad[:5])


@pytest.fixture(scope="module")
def suite_reports():
    return run_suite(ALL_GAMES, names=ALL_NAMES)


def _warm():
    G = fixture("FIX-ABS")
    shapley.normalized_discounted(G, 0.5)
    shapley.value_iterate(G, 2)
    evolution.evolve(G, [0.0, 0.0], 1.0)
    ctmc.discretized_discounted_value(G, 0.5, 0.3)


def test_criterion_1_fixture_oracles(capsys):
    _warm()
    bounds.clear_caches()
    start = time.perf_counter()
    lams, hs, ts = (0.1, 0.3, 0.5, 0.7, 0.9), (0.025, 0.1, 0.25, 0.5, 1.0), (0.5, 1.0, 2.0, 5.0)
    errs = []
    C, MP, A = fixture("FIX-CONST"), fixture("FIX-MP"), fixture("FIX-ABS")
    for n in range(1, 9):
        errs.append(abs(shapley.value_iterate(C, n)[0][0] - n))
        errs.append(abs(shapley.value_iterate(MP, n)[0][0]))
        errs.append(np.abs(shapley.value_iterate(A, n)[0] - [1, 0]).max())
    for lam in lams:
        errs.append(abs(shapley.normalized_discounted(C, lam).value[0] - 1))
        errs.append(abs(shapley.normalized_discounted(MP, lam).value[0]))
        errs.append(np.abs(shapley.normalized_discounted(A, lam).value - [lam, 0]).max())
        hat = shapley.normalized_discounted(A, lam / (1 + lam)).value
        errs.append(np.abs(hat - [lam / (1 + lam), 0]).max())
        for h in hs:
            mu = lam / (1 + lam - lam * h)
            errs.append(np.abs(shapley.discounted_value_duration(A, lam, h).value - [mu, 0]).max())
            errs.append(abs(shapley.discounted_value_duration(C, lam, h).value[0] - 1))
            errs.append(abs(shapley.discounted_value_duration(MP, lam, h).value[0]))
            wbar = ctmc.discretized_discounted_value(A, lam, h).value
            errs.append(np.abs(wbar - [lam / (1 + lam), 0]).max())
            errs.append(abs(ctmc.discretized_discounted_value(C, lam, h).value[0] - 1))
    for t in ts:
        errs.append(abs(evolution.evolve(C, [0.0], t, 1e-9).f[0] - t))
        errs.append(abs(evolution.evolve(MP, [0.0], t, 1e-9).f[0]))
        errs.append(np.abs(evolution.evolve(A, [0.0, 0.0], t, 1e-9).f - [1 - math.exp(-t), 0]).max())
    for h in hs:
        errs.append(abs(ctmc.integrated_payoff(A, h)[0, 0, 0] - (1 - math.exp(-h))))
        errs.append(abs(ctmc.integrated_payoff(C, h)[0, 0, 0] - h))
        errs.append(np.abs(ctmc.integrated_payoff(MP, h)[0] - h * np.array([[1, -1], [-1, 1]])).max())
    elapsed = time.perf_counter() - start
    worst = max(errs)
    ok = worst <= 1e-8 and elapsed < 5.0
    announce(capsys, 1, ok, f"{len(errs)} closed forms, max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_2_mu_identity(capsys):
    bounds.clear_caches()
    start = time.perf_counter()
    reports = run_suite(GAMES, checks=["MU-IDENTITY"], names=NAMES)
    elapsed = time.perf_counter() - start
    worst = max(r.constants["max_abs_lhs_minus_rhs"] for r in reports)
    points = sum(r.constants["grid_points"] for r in reports)
    ok = all(r.holds for r in reports) and worst <= 1e-7 and elapsed < 120 and points == 9000
    announce(capsys, 2, ok, f"{points} points, max |w^h - w_mu| {worst:.2e}, {elapsed:.1f} s")
    assert ok


CHERNOFF_EULER = {"CHERNOFF", "VN-RATE", "INTERP", "EULER-PAIR", "EULER-ODE", "COMPOSITE"}


def test_criterion_3_chernoff_euler(capsys, suite_reports):
    bad = failures(suite_reports, CHERNOFF_EULER)
    n = sum(r.constants.get("grid_points", 0) for r in suite_reports if r.check_id in CHERNOFF_EULER)
    announce(capsys, 3, not bad, f"{n} inequalities, {len(bad)} failing reports {describe(bad)}")
    assert not bad


DURATION = {"VANISH-H", "ASYMPTOTIC-H", "PRODUCT-LIMIT", "ASYMPTOTIC-H-VARYING"}


def test_criterion_4_discounted_duration(capsys, suite_reports):
    bad = failures(suite_reports, DURATION)
    n = sum(r.constants.get("grid_points", 0) for r in suite_reports if r.check_id in DURATION)
    announce(capsys, 4, not bad, f"{n} inequalities, {len(bad)} failing reports {describe(bad)}")
    assert not bad


def test_criterion_5_tilt(capsys, suite_reports):
    reps = [r for r in suite_reports if r.check_id in ("TILT-IDENTITY", "TILT-INVARIANCE")]
    worst = max(r.constants["max_abs_lhs_minus_rhs"] for r in reps)
    ok = all(r.holds for r in reps) and worst <= 1e-7
    announce(capsys, 5, ok, f"{len(reps)} reports, max identity gap {worst:.2e}")
    assert ok


FINITE = {"FIN-EXACT", "PARTITION-LIMIT", "NORMALIZED-ASYMPTOTIC"}


def test_criterion_6_finite_length(capsys, suite_reports):
    bad = failures(suite_reports, FINITE)
    G = fixture("FIX-ABS")
    limit = 1 - math.exp(-1)
    gaps = []
    for n in range(2, 257):
        U, _ = evolution.partition_value(G, Partition.uniform(1.0, n))
        gaps.append(abs(U[0] - limit))
    T0 = 1.0
    dominated = all(g <= T0 * math.sqrt(1 / n) for n, g in zip(range(2, 257), gaps))
    monotone = all(a >= b for a, b in zip(gaps, gaps[1:]))
    ok = not bad and dominated and monotone
    announce(capsys, 6, ok, f"{len(bad)} failing reports {describe(bad)}; FIX-ABS n=2..256 "
             f"gap {gaps[0]:.3e} -> {gaps[-1]:.3e}, monotone={monotone}, dominated={dominated}")
    assert ok


def test_criterion_7_continuous_time(capsys, suite_reports):
    gap_bad = failures(suite_reports, {"DISC-GAP"})
    disc_bad = failures(suite_reports, {"DISC-DISCOUNTED"})
    hatw = [r for r in suite_reports if r.check_id == "HATW-EQUATION"]
    resid = max(r.constants["max_abs_lhs_minus_rhs"] + r.rhs for r in hatw)
    skipped = sum(r.status == "SKIPPED" for r in suite_reports if r.check_id == "DISC-GAP")
    ok = not gap_bad and not disc_bad and resid <= 1e-6 and all(r.holds for r in hatw)
    announce(capsys, 7, ok, f"DISC-GAP failing {len(gap_bad)} ({skipped} ragged skipped), "
             f"DISC-DISCOUNTED failing {len(disc_bad)}, max HATW residual {resid:.2e} "
             f"{describe(gap_bad + disc_bad)}")
    assert ok


def test_criterion_8_matrix_games(capsys):
    rng = np.random.default_rng(2024)
    worst_exp, worst_prop = 0.0, 0.0
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        A = rng.uniform(-5, 5, size=(m, n))
        s = solve_matrix_game(A)
        worst_exp = max(worst_exp, best_pure_check(A, s.x, s.y))
        v = s.value
        c, k = rng.uniform(-3, 3), rng.uniform(0.1, 4)
        B = A + rng.uniform(-1, 1, size=A.shape)
        worst_prop = max(
            worst_prop,
            abs(game_value(A + c) - v - c),
            abs(game_value(k * A) - k * v),
            abs(game_value(-A.T) + v),
            max(0.0, abs(game_value(B) - v) - np.abs(B - A).max()),
        )
    ok = worst_exp <= 1e-8 and worst_prop <= 1e-9
    announce(capsys, 8, ok, f"1000 games, max exploitability {worst_exp:.2e}, "
             f"max property defect {worst_prop:.2e}")
    assert ok


def test_criterion_9_tolerance_independence(capsys, suite_reports):
    tight = run_suite(ALL_GAMES, names=ALL_NAMES, tol=bounds.DEFAULT_TOL / 10,
                      flow_tol=bounds.DEFAULT_FLOW_TOL / 10)
    changed = [(a.check_id, a.game) for a, b in zip(suite_reports, tight)
               if (a.holds, a.status) != (b.holds, b.status)]
    announce(capsys, 9, not changed, f"{len(tight)} reports re-run at 10x tighter tolerance, "
             f"{len(changed)} verdict changes {changed[:5]}")
    assert not changed
