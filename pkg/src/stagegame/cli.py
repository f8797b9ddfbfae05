"""Command-line front end.

    stagegame value      --game G --n 5 [--h 0.5]
    stagegame discounted --game G --lambda 0.5 [--h 0.5 | --alpha 0.3]
    stagegame evolve     --game G --t 3 [--tol 1e-6]
    stagegame partition  --game G --partition uniform:t=1,n=8 [--lambda 0.5]
    stagegame ctvalue    --game G (--partition P | --lambda L --h H)
    stagegame check      CHECK_ID --game G [--lambda ..] [--h ..] [--t ..] [--n ..]
    stagegame suite      [--game G ...] [--random 100] [--out reports.jsonl]
    stagegame sweep      QUANTITY --game G --lambda 0.5 --h 0.5,0.25,0.125

``--game`` takes a JSON file or a fixture name (FIX-CONST, FIX-MP, FIX-ABS).
Exit codes: 0 success, 1 a check failed, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, ctmc, evolution, shapley
from .game import FIXTURES, GameSpec, fixture, load_game, random_suite
from .partition import Partition, parse_partition

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def read_game(ref: str) -> GameSpec:
    if ref in FIXTURES and not Path(ref).exists():
        return fixture(ref)
    if not Path(ref).exists():
        raise UsageError(f"game file {ref!r} not found (fixtures: {', '.join(FIXTURES)})")
    return load_game(ref)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return str(v)
    s = f"{v:.12g}"
    return s if any(c in s for c in ".en") else s + ".0"


def _vec(v) -> str:
    return "[" + ", ".join(_fmt(float(x)) for x in np.asarray(v).ravel()) + "]"


def _emit(fields: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(bounds._jsonable(fields), sort_keys=True) + "\n")
    elif fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(fields.keys())
        w.writerow([_vec(v) if isinstance(v, np.ndarray) else v for v in fields.values()])
    else:
        for k, v in fields.items():
            out.write(f"{k} = {_vec(v) if isinstance(v, np.ndarray) else v}\n")


def _one(values, name):
    if values is None:
        raise UsageError(f"--{name} is required")
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value for this command")
    return values[0]


# ---------------------------------------------------------------- commands

def cmd_value(a, out):
    G = read_game(a.game)
    n = _one(a.n, "n")
    h = _one(a.h, "h") if a.h else 1.0
    V, v = shapley.value_iterate(G, n, h)
    fields = {"n": n, "h": h, "V": V}
    if v is not None:
        fields["v"] = v
    _emit(fields, a.format, out)
    return EXIT_OK


def cmd_discounted(a, out):
    G = read_game(a.game)
    lam = _one(a.lam, "lambda")
    if a.alpha and a.h:
        raise UsageError("--alpha and --h are exclusive")
    if a.alpha:
        alpha = _one(a.alpha, "alpha")
        r = shapley.discounted_tilde(G, alpha, lam, a.tol)
        fields = {"lambda": lam, "alpha": alpha, "mu": shapley.tilt_mu(lam, alpha)}
    else:
        h = _one(a.h, "h") if a.h else 1.0
        r = shapley.discounted_value_duration(G, lam, h, a.tol)
        fields = {"lambda": lam, "h": h, "mu": shapley.duration_mu(lam, h)}
    fields.update(w=r.value, certified_error=r.certified_error, iterations=r.iterations)
    _emit(fields, a.format, out)
    return EXIT_OK


def _start(a, G):
    if a.z is None:
        return np.zeros(G.nstates)
    if len(a.z) != G.nstates:
        raise UsageError(f"--z has {len(a.z)} entries, game has {G.nstates} states")
    return np.asarray(a.z)


def cmd_evolve(a, out):
    G = read_game(a.game)
    t = _one(a.t, "t")
    r = evolution.evolve(G, _start(a, G), t, a.tol)
    _emit({"t": t, "f": r.f, "certified_error": r.certified_error,
           "method": r.method, "steps": r.steps_used}, a.format, out)
    return EXIT_OK


def _partition(a) -> Partition:
    if not a.partition:
        raise UsageError("--partition is required")
    return parse_partition(a.partition)


def cmd_partition(a, out):
    G = read_game(a.game)
    H = _partition(a)
    if a.lam:
        lam = _one(a.lam, "lambda")
        r = evolution.discounted_product(G, lam, H, a.tol)
        fields = {"lambda": lam, "steps": len(H), "W": r.value,
                  "certified_error": r.certified_error, "factors": r.iterations}
    else:
        U, u = evolution.partition_value(G, H)
        fields = {"t": H.total, "steps": len(H), "mesh": H.mesh, "U": U, "u": u}
    _emit(fields, a.format, out)
    return EXIT_OK


def cmd_ctvalue(a, out):
    G = read_game(a.game)
    if a.partition:
        H = _partition(a)
        V = ctmc.discretized_finite_value(G, H)
        fields = {"t": H.total, "steps": len(H), "V": V, "v": V / H.total}
    else:
        lam, h = _one(a.lam, "lambda"), _one(a.h, "h")
        r = ctmc.discretized_discounted_value(G, lam, h, a.tol)
        fields = {"lambda": lam, "h": h, "w": r.value, "certified_error": r.certified_error}
    _emit(fields, a.format, out)
    return EXIT_OK


def _check_params(a) -> dict:
    p = {}
    if a.lam:
        p["lambdas"] = tuple(a.lam)
    if a.h:
        p["hs"] = tuple(a.h)
        p["meshes"] = tuple(a.h)
    if a.alpha:
        p["alphas"] = tuple(a.alpha)
    if a.t:
        p["times"] = tuple(a.t)
        if len(a.t) == 1:
            p["t"] = a.t[0]
    if a.n:
        p["ns"] = tuple(a.n)
    if a.seed is not None:
        p["seed"] = a.seed
    return p


def _write_reports(reports, a, out):
    if a.out:
        bounds.write_jsonl(reports, a.out)
    if a.format == "csv":
        bounds.write_csv(reports, out)
    elif a.format == "json" or not a.out:
        if a.format == "json":
            bounds.write_jsonl(reports, out)
        else:
            for r in reports:
                mark = {"OK": "holds" if r.holds else "FAILS"}.get(r.status, r.status)
                out.write(f"{r.check_id:22s} {r.game:10s} {mark:7s} lhs={_fmt(r.lhs)} "
                          f"rhs={_fmt(r.rhs)} slack={_fmt(r.slack)}\n")


def _summary(reports, err) -> int:
    failed = [r for r in reports if not r.holds]
    err.write(f"{len(reports)} reports, {len(failed)} failed, "
              f"{sum(r.status == 'SKIPPED' for r in reports)} skipped\n")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_check(a, out):
    if a.check_id not in bounds.REGISTRY:
        raise UsageError(f"unknown check {a.check_id!r}; choose from {', '.join(bounds.CHECK_IDS)}")
    G = read_game(a.game)
    spec = bounds.CheckSpec(a.check_id, G, _check_params(a), game_name=Path(a.game).stem,
                            **({"tol": a.tol_given} if a.tol_given else {}))
    r = bounds.run_check(spec)
    if a.out:
        bounds.write_jsonl([r], a.out)
    if a.format == "csv":
        bounds.write_csv([r], out)
    else:
        out.write(bounds.report_json(r) + "\n")
    return EXIT_OK if r.holds else EXIT_FAILED


def cmd_suite(a, out):
    games, names = [], []
    for ref in a.games or []:
        games.append(read_game(ref))
        names.append(Path(ref).stem)
    if a.random:
        for k, G in enumerate(random_suite(a.random)):
            games.append(G)
            names.append(f"random{k}")
    if not games and not a.random:
        games = [fixture(f) for f in FIXTURES]
        names = list(FIXTURES)
    checks = a.checks.split(",") if a.checks else None
    if checks:
        unknown = [c for c in checks if c not in bounds.REGISTRY]
        if unknown:
            raise UsageError(f"unknown checks {unknown}")
    reports = bounds.run_suite(games, [_check_params(a)], checks=checks, names=names,
                               **({"tol": a.tol_given} if a.tol_given else {}))
    _write_reports(reports, a, out)
    return _summary(reports, sys.stderr)


SWEEPS = ("value", "discounted", "product", "partition", "evolve", "ctdiscounted")


def cmd_sweep(a, out):
    """CSV rows of (grid point, value vector, certified error)."""
    G = read_game(a.game)
    q = a.quantity
    lams, hs, ts, ns = a.lam or [None], a.h or [None], a.t or [None], a.n or [None]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["lambda", "h", "t", "n"] + [f"value_{s}" for s in G.states] + ["certified_error"])
    for lam in lams:
        for h in hs:
            for t in ts:
                for n in ns:
                    vec, err = _sweep_point(G, q, lam, h, t, n, a.tol)
                    w.writerow([_cell(lam), _cell(h), _cell(t), _cell(n)]
                               + [_fmt(float(x)) for x in vec] + [_fmt(err)])
    return EXIT_OK


def _cell(v) -> str:
    return "" if v is None else (_fmt(v) if isinstance(v, float) else str(v))


def _need(**kw):
    missing = [k for k, v in kw.items() if v is None]
    if missing:
        raise UsageError(f"sweep needs --{' --'.join(missing)}")


def _sweep_point(G, q, lam, h, t, n, tol):
    if q == "value":
        _need(n=n)
        _, v = shapley.value_iterate(G, n, h or 1.0)
        return (v if v is not None else np.zeros(G.nstates)), 0.0
    if q == "discounted":
        _need(**{"lambda": lam})
        r = shapley.discounted_value_duration(G, lam, h or 1.0, tol)
        return r.value, r.certified_error
    if q == "product":
        _need(**{"lambda": lam, "h": h})
        r = evolution.discounted_product(G, lam, Partition((h,)), tol)
        return r.value, r.certified_error
    if q == "partition":
        _need(t=t, n=n)
        U, _ = evolution.partition_value(G, Partition.uniform(t, n))
        return U, 0.0
    if q == "evolve":
        _need(t=t)
        r = evolution.evolve(G, np.zeros(G.nstates), t, tol)
        return r.f, r.certified_error
    if q == "ctdiscounted":
        _need(**{"lambda": lam, "h": h})
        r = ctmc.discretized_discounted_value(G, lam, h, tol)
        return r.value, r.certified_error
    raise UsageError(f"unknown sweep quantity {q!r}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=_floats, metavar="L[,L..]")
    common.add_argument("--h", type=_floats, metavar="H[,H..]")
    common.add_argument("--alpha", type=_floats, metavar="A[,A..]")
    common.add_argument("--t", type=_floats, metavar="T[,T..]")
    common.add_argument("--n", type=_ints, metavar="N[,N..]")
    common.add_argument("--tol", dest="tol_given", type=float, default=None)
    common.add_argument("--partition")
    common.add_argument("--z", type=_floats, help="start vector for evolve")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("table", "json", "csv"), default="table")

    p = _Parser(prog="stagegame", description="Stochastic games with varying stage duration.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("value", "discounted", "evolve", "partition", "ctvalue"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--game", required=True)
    s = sub.add_parser("check", parents=[common])
    s.add_argument("check_id")
    s.add_argument("--game", required=True)
    s = sub.add_parser("suite", parents=[common])
    s.add_argument("--game", dest="games", action="append")
    s.add_argument("--random", type=int, default=0, help="add random games seeded 0..N-1")
    s.add_argument("--checks", help="comma-separated check ids (default: all)")
    s = sub.add_parser("sweep", parents=[common])
    s.add_argument("quantity", choices=SWEEPS)
    s.add_argument("--game", required=True)
    return p


COMMANDS = {
    "value": cmd_value, "discounted": cmd_discounted, "evolve": cmd_evolve,
    "partition": cmd_partition, "ctvalue": cmd_ctvalue, "check": cmd_check,
    "suite": cmd_suite, "sweep": cmd_sweep,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        a = build_parser().parse_args(argv)
        a.tol = a.tol_given if a.tol_given is not None else (
            1e-6 if a.command == "evolve" else 1e-10)
        if a.tol <= 0:
            raise UsageError("--tol must be positive")
        buf = io.StringIO()
        code = COMMANDS[a.command](a, buf)
        out.write(buf.getvalue())
        return code
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except bounds.CheckError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, KeyError, OSError, evolution.EvolutionError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
