import io
import json

import pytest

from stagegame.cli import main
from stagegame.game import fixture, save_game


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def fixabs_path(tmp_path):
    p = tmp_path / "fixabs.json"
    save_game(fixture("FIX-ABS"), p)
    return str(p)


@pytest.fixture
def fixconst_path(tmp_path):
    p = tmp_path / "fixconst.json"
    save_game(fixture("FIX-CONST"), p)
    return str(p)


def test_discounted(fixabs_path):
    code, out = run("discounted", "--game", fixabs_path, "--lambda", "0.5", "--h", "0.5")
    assert code == 0
    assert "w = [0.4, 0.0]" in out


def test_discounted_tilt(fixabs_path):
    code, out = run("discounted", "--game", fixabs_path, "--lambda", "0.5", "--alpha", "1",
                    "--format", "json")
    assert code == 0 and json.loads(out)["w"][0] == pytest.approx(0.5)


def test_check_exit_zero(fixabs_path):
    code, out = run("check", "MU-IDENTITY", "--game", fixabs_path, "--lambda", "0.5", "--h", "0.5")
    assert code == 0
    rep = json.loads(out)
    assert rep["holds"] is True and rep["check_id"] == "MU-IDENTITY"


def test_evolve(fixconst_path):
    code, out = run("evolve", "--game", fixconst_path, "--t", "3", "--tol", "1e-8")
    assert code == 0 and "f = [3.0]" in out


def test_value_and_partition(fixabs_path):
    assert "V = [1.0, 0.0]" in run("value", "--game", fixabs_path, "--n", "3")[1]
    code, out = run("partition", "--game", fixabs_path, "--partition", "list:0.5,0.25,0.25",
                    "--format", "json")
    assert code == 0 and json.loads(out)["t"] == 1.0
    code, out = run("partition", "--game", fixabs_path, "--partition", "uniform:t=1,n=2",
                    "--lambda", "0.5")
    assert code == 0 and "W = [" in out


def test_ctvalue(fixabs_path):
    code, out = run("ctvalue", "--game", fixabs_path, "--lambda", "0.5", "--h", "0.2",
                    "--format", "json")
    assert code == 0 and json.loads(out)["w"][0] == pytest.approx(1 / 3, abs=1e-9)
    code, out = run("ctvalue", "--game", fixabs_path, "--partition", "uniform:t=1,n=4",
                    "--format", "json")
    assert json.loads(out)["V"][0] == pytest.approx(0.6321205588, abs=1e-9)


def test_sweep_duration(fixabs_path):
    code, out = run("sweep", "discounted", "--game", fixabs_path, "--lambda", "0.5",
                    "--h", "0.5,0.1,0.01")
    rows = [r.split(",") for r in out.strip().splitlines()]
    assert code == 0 and rows[0][0] == "lambda"
    vals = [float(r[4]) for r in rows[1:]]
    assert vals == pytest.approx([0.4, 0.5 / 1.45, 0.5 / 1.495], abs=1e-11)


def test_sweep_constant_game(fixconst_path):
    code, out = run("sweep", "value", "--game", fixconst_path, "--n", "1,2,5,9")
    assert [float(r.split(",")[4]) for r in out.strip().splitlines()[1:]] == [1.0] * 4


def test_sweep_partition_converges(fixabs_path):
    code, out = run("sweep", "partition", "--game", fixabs_path, "--t", "1", "--n", "1,8,64,512")
    vals = [float(r.split(",")[4]) for r in out.strip().splitlines()[1:]]
    gaps = [v - 0.6321205588285577 for v in vals]
    assert all(a > b > 0 for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_suite_fixtures(tmp_path):
    out_path = tmp_path / "r.jsonl"
    code, out = run("suite", "--out", str(out_path), "--format", "csv")
    assert code == 0
    assert len(out.strip().splitlines()) == 26 * 3 + 1
    assert len(out_path.read_text().splitlines()) == 26 * 3


def test_output_is_byte_identical(fixabs_path):
    argv = ("suite", "--game", fixabs_path, "--random", "2", "--checks", "EULER-PAIR,DISC-GAP",
            "--format", "json", "--seed", "4")
    assert run(*argv) == run(*argv)


@pytest.mark.parametrize("argv", [
    (),
    ("value",),
    ("value", "--game", "missing.json", "--n", "2"),
    ("value", "--game", "FIX-ABS"),
    ("value", "--game", "FIX-ABS", "--n", "x"),
    ("discounted", "--game", "FIX-ABS", "--lambda", "1.5"),
    ("discounted", "--game", "FIX-ABS", "--lambda", "0.5", "--h", "0.5", "--alpha", "0.5"),
    ("evolve", "--game", "FIX-ABS", "--t", "1", "--tol", "-1"),
    ("partition", "--game", "FIX-ABS", "--partition", "spiral:1"),
    ("check", "NOPE", "--game", "FIX-ABS"),
    ("check", "MU-IDENTITY", "--game", "FIX-ABS", "--lambda", "2"),
    ("ctvalue", "--game", "FIX-ABS", "--lambda", "0.5"),
    ("sweep", "product", "--game", "FIX-ABS", "--lambda", "0.5"),
    ("frobnicate",),
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(*argv)[0] == 2
    assert capsys.readouterr().err.strip()


def test_bad_game_file_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"states": ["a"], "actions": [[1, 1]], "payoff": [[[0.0]]],
                             "generator": [[[[0.5]]]]}))
    assert run("value", "--game", str(p), "--n", "1")[0] == 2


def test_failed_check_exits_1(monkeypatch):
    from stagegame import bounds
    from stagegame.bounds import _Entry, _Part

    def always_fails(ctx, p):
        return [_Part(1.0, 0.0, 0.0, {})]

    monkeypatch.setitem(bounds.REGISTRY, "MU-IDENTITY", _Entry(always_fails, True, "x"))
    assert run("check", "MU-IDENTITY", "--game", "FIX-ABS")[0] == 1
    assert run("suite", "--checks", "MU-IDENTITY")[0] == 1
